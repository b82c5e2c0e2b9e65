//! Plug-in restorers: hand a degraded sequence to an arbitrary shell command
//! and read its output image back.
//!
//! The command template must contain the placeholders `{in}` and `{out}`.
//! `{in}` is replaced with the sequence directory (frames plus `gt.png` and
//! `params.json`), `{out}` with the file the command must create. Everything
//! the command prints goes to `cmd.log` inside the work directory so a failed
//! run can be diagnosed after the fact.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::raster::{load_image, Image};

/// Default wall-clock budget for one external invocation.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

/// How often the child is polled for completion.
const POLL_INTERVAL: Duration = Duration::from_millis(25);

/// Run `cmd_template` on the sequence in `seq_dir` with the default timeout.
pub fn run_external_restorer(seq_dir: &Path, cmd_template: &str, workdir: &Path) -> Result<Image> {
    run_external_restorer_with(seq_dir, cmd_template, workdir, DEFAULT_TIMEOUT)
}

/// Same as [`run_external_restorer`] with an explicit timeout. On timeout the
/// child is killed and [`Error::ExternalTimeout`] is returned; a nonzero exit
/// becomes [`Error::ExternalFailed`] pointing at the log file; a clean exit
/// without the promised output becomes [`Error::ExternalMissingOutput`].
pub fn run_external_restorer_with(
    seq_dir: &Path,
    cmd_template: &str,
    workdir: &Path,
    timeout: Duration,
) -> Result<Image> {
    if !cmd_template.contains("{in}") || !cmd_template.contains("{out}") {
        return Err(Error::arg(format!(
            "external command must contain {{in}} and {{out}} placeholders: {cmd_template:?}"
        )));
    }
    fs::create_dir_all(workdir).map_err(|e| Error::io(workdir, e))?;
    let out_path = workdir.join("restored.png");
    if out_path.exists() {
        // A stale output from an earlier attempt must not masquerade as a
        // fresh result.
        fs::remove_file(&out_path).map_err(|e| Error::io(&out_path, e))?;
    }

    let cmd = cmd_template
        .replace("{in}", &seq_dir.display().to_string())
        .replace("{out}", &out_path.display().to_string());

    let log_path = workdir.join("cmd.log");
    let log = fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let log_err = log.try_clone().map_err(|e| Error::io(&log_path, e))?;

    log::debug!("external restorer: sh -c {cmd:?}");
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .stdin(Stdio::null())
        .stdout(Stdio::from(log))
        .stderr(Stdio::from(log_err))
        .spawn()
        .map_err(|e| Error::io(workdir, e))?;

    let status = wait_with_timeout(&mut child, timeout, &log_path)?;
    // `code()` is None when a signal killed the child; report that as a
    // failure with a sentinel status rather than pretending it succeeded.
    let code = status.code().unwrap_or(-1);
    if !status.success() {
        return Err(Error::ExternalFailed {
            status: code,
            log: log_path,
        });
    }
    if !out_path.exists() {
        return Err(Error::ExternalMissingOutput(out_path));
    }
    load_image(&out_path)
}

fn wait_with_timeout(
    child: &mut std::process::Child,
    timeout: Duration,
    log_path: &Path,
) -> Result<std::process::ExitStatus> {
    let started = Instant::now();
    loop {
        match child.try_wait() {
            Ok(Some(status)) => return Ok(status),
            Ok(None) => {}
            Err(e) => return Err(Error::io(log_path, e)),
        }
        if started.elapsed() >= timeout {
            // Best effort: the child may exit on its own between the poll and
            // the kill, in which case kill() reports InvalidInput and we can
            // still treat the run as timed out (it exceeded the budget).
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::ExternalTimeout(timeout));
        }
        std::thread::sleep(POLL_INTERVAL);
    }
}

/// Work directory name for one (sequence, pipeline) pair, kept short and
/// filesystem-safe.
pub(crate) fn task_workdir(root: &Path, scene: &str, combo: &str, pipeline: &str) -> PathBuf {
    let safe = |s: &str| -> String {
        s.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            })
            .collect()
    };
    root.join(safe(scene)).join(safe(combo)).join(safe(pipeline))
}
