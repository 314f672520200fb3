//! Stand-in for the Python runner. It never executes the draft; instead it
//! follows `# stub:` directives in the draft's comments and prints a canned
//! result block, so the pipeline can be exercised without an interpreter.
//!
//! Directives (one per comment line, first `outcome` wins):
//!
//! ```text
//! # stub: outcome success|hang|crash|no-figure|bad-png|truncated
//! # stub: error <ExceptionName>: <message>
//! # stub: derender <DerenderedPlot JSON on one line>
//! # stub: print <text for stdout before the result block>
//! ```
//!
//! A draft without directives succeeds with an empty de-rendering.

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use plotgen::exec::protocol::{render_result_block, RunnerPayload, RESULT_BEGIN};
use plotgen::exec::{ExecStatus, RunnerJob};
use plotgen::plot::DerenderedPlot;
use sha2::{Digest, Sha256};

#[derive(Debug, Default)]
struct Directives {
    outcome: Option<String>,
    error: Option<String>,
    derender: Option<String>,
    prints: Vec<String>,
}

fn parse_directives(code: &str) -> Directives {
    let mut d = Directives::default();
    for line in code.lines() {
        let Some(rest) = line.trim().strip_prefix("# stub:") else {
            continue;
        };
        let rest = rest.trim();
        let (word, arg) = rest.split_once(' ').unwrap_or((rest, ""));
        let arg = arg.trim().to_string();
        match word {
            "outcome" if d.outcome.is_none() => d.outcome = Some(arg),
            "error" if d.error.is_none() => d.error = Some(arg),
            "derender" => d.derender = Some(arg),
            "print" => d.prints.push(arg),
            _ => {}
        }
    }
    d
}

/// A small PNG whose pixels depend on the draft source.
fn write_png(path: &Path, code: &str) -> std::io::Result<()> {
    const SIDE: u32 = 16;
    let seed = Sha256::digest(code.as_bytes());
    let pixels: Vec<u8> = (0..SIDE * SIDE * 3)
        .map(|i| seed[i as usize % seed.len()])
        .collect();
    let file = std::fs::File::create(path)?;
    let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), SIDE, SIDE);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(std::io::Error::other)?;
    writer
        .write_image_data(&pixels)
        .map_err(std::io::Error::other)?;
    writer.finish().map_err(std::io::Error::other)
}

fn hang(job_path: &Path) -> ! {
    let child = std::process::Command::new("sleep").arg("300").spawn();
    let mut pids = vec![std::process::id().to_string()];
    if let Ok(child) = &child {
        pids.push(child.id().to_string());
    }
    if let Some(dir) = job_path.parent() {
        let _ = std::fs::write(dir.join("stub_pids.txt"), pids.join("\n") + "\n");
    }
    loop {
        std::thread::sleep(std::time::Duration::from_secs(1));
    }
}

fn emit(payload: &RunnerPayload) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(render_result_block(payload).as_bytes());
    let _ = out.flush();
}

fn main() -> ExitCode {
    let Some(job_path) = std::env::args_os().nth(1) else {
        eprintln!("usage: plotgen-stub-runner <job.json>");
        return ExitCode::from(2);
    };
    let job_path = Path::new(&job_path);
    let job: RunnerJob = match std::fs::read(job_path)
        .map_err(|e| e.to_string())
        .and_then(|b| serde_json::from_slice(&b).map_err(|e| e.to_string()))
    {
        Ok(job) => job,
        Err(e) => {
            eprintln!("cannot read job {}: {e}", job_path.display());
            return ExitCode::from(2);
        }
    };
    let code = match std::fs::read_to_string(&job.code_path) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cannot read draft {}: {e}", job.code_path.display());
            return ExitCode::from(2);
        }
    };
    let d = parse_directives(&code);
    for line in &d.prints {
        println!("{line}");
    }

    if let Some(error) = &d.error {
        let line_no = code
            .lines()
            .position(|l| l.contains("# stub: error"))
            .map_or(1, |i| i + 1);
        emit(&RunnerPayload {
            status: ExecStatus::RuntimeError,
            traceback: format!(
                "Traceback (most recent call last):\n  File \"{}\", line {line_no}, in <module>\n{error}\n",
                job.code_path.display()
            ),
            figure_path: None,
            derendered: None,
        });
        return ExitCode::SUCCESS;
    }

    let outcome = d.outcome.as_deref().unwrap_or("success");
    match outcome {
        "hang" => hang(job_path),
        "crash" => {
            eprintln!("stub runner: simulated interpreter crash");
            return ExitCode::from(3);
        }
        "truncated" => {
            println!("{RESULT_BEGIN}\n{{\"status\": \"succ");
            return ExitCode::SUCCESS;
        }
        "bad-png" => {
            if let Err(e) = std::fs::write(&job.figure_out_path, b"not a png") {
                eprintln!("cannot write figure: {e}");
                return ExitCode::from(3);
            }
        }
        "no-figure" => {}
        _ => {
            if let Err(e) = write_png(&job.figure_out_path, &code) {
                eprintln!("cannot write figure: {e}");
                return ExitCode::from(3);
            }
        }
    }

    let derendered = if job.derender {
        match d
            .derender
            .as_deref()
            .map(serde_json::from_str::<DerenderedPlot>)
        {
            None => Some(serde_json::from_str("{}").expect("empty plot parses")),
            Some(Ok(plot)) => Some(plot),
            Some(Err(e)) => {
                eprintln!("bad derender directive: {e}");
                return ExitCode::from(2);
            }
        }
    } else {
        None
    };
    emit(&RunnerPayload {
        status: ExecStatus::Success,
        traceback: String::new(),
        figure_path: Some(job.figure_out_path.display().to_string()),
        derendered,
    });
    ExitCode::SUCCESS
}
