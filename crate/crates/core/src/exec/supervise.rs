//! Spawns the runner in its own process group and enforces the time limit.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

const POLL_INTERVAL: Duration = Duration::from_millis(10);

pub(crate) enum Exit {
    Finished(ExitStatus),
    TimedOut,
}

pub(crate) struct Supervised {
    pub exit: Exit,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub elapsed: Duration,
}

/// Runs `program args.. job_path` with `cwd` as working directory. The whole
/// process group is killed at the deadline, and swept again after the direct
/// child exits so no descendant outlives the call.
pub(crate) fn run_supervised(
    argv: &[String],
    job_path: &Path,
    cwd: &Path,
    limit: Duration,
) -> std::io::Result<Supervised> {
    let (program, args) = argv.split_first().ok_or_else(|| {
        std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty runner command")
    })?;
    let started = Instant::now();
    let mut child = Command::new(program)
        .args(args)
        .arg(job_path)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()?;
    let group = child.id() as libc::pid_t;

    let mut out_pipe = child.stdout.take().expect("stdout piped");
    let mut err_pipe = child.stderr.take().expect("stderr piped");
    let out_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = out_pipe.read_to_end(&mut buf);
        buf
    });
    let err_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = err_pipe.read_to_end(&mut buf);
        buf
    });

    let deadline = started + limit;
    let exit = loop {
        if let Some(status) = child.try_wait()? {
            break Exit::Finished(status);
        }
        if Instant::now() >= deadline {
            kill_group(group);
            let _ = child.wait();
            break Exit::TimedOut;
        }
        thread::sleep(POLL_INTERVAL);
    };
    kill_group(group);

    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    Ok(Supervised {
        exit,
        stdout,
        stderr,
        elapsed: started.elapsed(),
    })
}

fn kill_group(group: libc::pid_t) {
    // SAFETY: killpg only sends a signal; ESRCH for an empty group is expected.
    unsafe {
        libc::killpg(group, libc::SIGKILL);
    }
}
