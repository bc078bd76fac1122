//! Subprocess execution with a wall-clock timeout and capped output.
//!
//! Generated programs may spin forever or flood stdout, so every child
//! process in the harness runs through here: pipes are drained on reader
//! threads (up to a byte cap, discarding the rest so the child never
//! blocks), and the child is killed at the deadline.

use std::io::{self, Read};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

#[derive(Debug)]
pub struct ProcOutput {
    pub exit_code: Option<i32>,
    pub signal: Option<i32>,
    pub timed_out: bool,
    pub stdout: String,
    pub stderr: String,
    pub wall: Duration,
}

impl ProcOutput {
    pub fn success(&self) -> bool {
        !self.timed_out && self.signal.is_none() && self.exit_code == Some(0)
    }

    /// Exited via a signal (crash) rather than a normal return.
    pub fn crashed(&self) -> bool {
        !self.timed_out && (self.signal.is_some() || self.exit_code.is_none())
    }
}

pub const DEFAULT_OUTPUT_CAP: usize = 1024 * 1024;

fn capped_reader(stream: Option<impl Read + Send + 'static>, cap: usize) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::with_capacity(4096.min(cap));
        if let Some(mut stream) = stream {
            let _ = (&mut stream).take(cap as u64).read_to_end(&mut buf);
            // Keep draining so the child never stalls on a full pipe.
            let _ = io::copy(&mut stream, &mut io::sink());
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

fn wait_deadline(child: &mut Child, deadline: Instant) -> io::Result<(Option<std::process::ExitStatus>, bool)> {
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok((Some(status), false));
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let status = child.wait()?;
            return Ok((Some(status), true));
        }
        thread::sleep(Duration::from_millis(5));
    }
}

pub fn run_with_timeout(
    cmd: &mut Command,
    timeout: Duration,
    output_cap: usize,
) -> io::Result<ProcOutput> {
    let started = Instant::now();
    let mut child = cmd
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;

    let stdout = capped_reader(child.stdout.take(), output_cap);
    let stderr = capped_reader(child.stderr.take(), output_cap);

    let (status, timed_out) = wait_deadline(&mut child, started + timeout)?;
    let wall = started.elapsed();
    let stdout = stdout.join().unwrap_or_default();
    let stderr = stderr.join().unwrap_or_default();

    let status = status.expect("wait_deadline always yields a status");
    #[cfg(unix)]
    let signal = {
        use std::os::unix::process::ExitStatusExt;
        status.signal()
    };
    #[cfg(not(unix))]
    let signal = None;

    Ok(ProcOutput {
        exit_code: status.code(),
        signal: if timed_out { None } else { signal },
        timed_out,
        stdout,
        stderr,
        wall,
    })
}
