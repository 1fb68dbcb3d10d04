#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use weave_core::kernel::KernelRegistry;
use weave_core::render::{render_file, RenderError, RenderOptions, RenderReport};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/corpus")
}

/// Renders in this process with the builtin kernels only.
pub fn render_to(input: &Path, out_dir: &Path) -> Result<RenderReport, RenderError> {
    let opts = RenderOptions {
        output_dir: Some(out_dir.to_path_buf()),
        ..RenderOptions::default()
    };
    render_file(input, &KernelRegistry::with_builtins(), &opts)
}

/// Writes `source` to `<dir>/<name>` and renders it next to itself,
/// returning the document HTML.
pub fn render_source(dir: &Path, name: &str, source: &str) -> Result<String, RenderError> {
    let input = dir.join(name);
    std::fs::write(&input, source).expect("write source");
    let report = render_to(&input, dir)?;
    Ok(std::fs::read_to_string(&report.written[0]).expect("read output"))
}

pub fn weave() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_weave"));
    // Keep the caller's environment from registering extra kernels.
    for (key, _) in std::env::vars() {
        if key.starts_with("WEAVE_KERNEL_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

pub fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output {
        status,
        stdout,
        stderr,
    } = cmd.output().expect("spawn weave");
    (
        status.code().unwrap_or(-1),
        String::from_utf8_lossy(&stdout).into_owned(),
        String::from_utf8_lossy(&stderr).into_owned(),
    )
}

/// The `--kernel` value that runs the builtin calc kernel as a child
/// process under another language name.
pub fn calc_as(lang: &str) -> String {
    format!(
        "{lang}={} kernel calc --lang {lang}",
        env!("CARGO_BIN_EXE_weave")
    )
}
