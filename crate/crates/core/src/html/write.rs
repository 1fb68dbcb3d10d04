use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{render_document, render_slides, NoSlides, RenderConfig};
use crate::front_matter::{OutputKind, OutputSpec};
use crate::markdown::{Block, BlockKind};
use crate::weave::WovenDocument;

#[derive(Debug, Error)]
pub enum WriteError {
    #[error(transparent)]
    NoSlides(#[from] NoSlides),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Where and under which name outputs are written.
#[derive(Debug, Clone)]
pub struct OutputJob<'a> {
    pub out_dir: &'a Path,
    /// File stem: `<stem>.html`, `<stem>-slides.html`, `<stem>_files/`.
    pub stem: &'a str,
    /// Directory the kernels wrote figures into.
    pub figure_dir: Option<&'a Path>,
    /// Logo file, already resolved against the document's directory.
    pub logo: Option<&'a Path>,
}

impl OutputJob<'_> {
    pub fn files_dir_name(&self) -> String {
        format!("{}_files", self.stem)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WriteError + '_ {
    move |source| WriteError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn figure_names(blocks: &[Block], out: &mut Vec<String>) {
    for block in blocks {
        match &block.kind {
            BlockKind::Figure(f) => out.push(f.name.clone()),
            BlockKind::BlockQuote(inner) => figure_names(inner, out),
            BlockKind::BulletList(items) | BlockKind::OrderedList { items, .. } => {
                for item in items {
                    figure_names(item, out);
                }
            }
            _ => {}
        }
    }
}

/// Renders every output and copies figures and the logo next to them.
/// Returns the HTML files written, in output order.
pub fn write_outputs(
    doc: &WovenDocument,
    outputs: &[OutputSpec],
    job: &OutputJob<'_>,
) -> Result<Vec<PathBuf>, WriteError> {
    let files_dir_name = job.files_dir_name();
    let logo_name = job
        .logo
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned());
    let wants_slides = outputs.iter().any(|o| o.kind == OutputKind::HtmlSlides);

    // Render everything first so a slide error leaves no partial output.
    let mut rendered = Vec::new();
    for spec in outputs {
        let cfg = RenderConfig::from_spec(spec, &files_dir_name, logo_name.clone());
        let (name, html) = match spec.kind {
            OutputKind::HtmlDocument => (format!("{}.html", job.stem), render_document(doc, &cfg)),
            OutputKind::HtmlSlides => (
                format!("{}-slides.html", job.stem),
                render_slides(doc, &cfg)?,
            ),
        };
        rendered.push((job.out_dir.join(name), html));
    }

    std::fs::create_dir_all(job.out_dir).map_err(io_err(job.out_dir))?;
    let mut figures = Vec::new();
    figure_names(&doc.blocks, &mut figures);
    let logo = job.logo.filter(|_| wants_slides);
    if !figures.is_empty() || logo.is_some() {
        let files_dir = job.out_dir.join(&files_dir_name);
        std::fs::create_dir_all(&files_dir).map_err(io_err(&files_dir))?;
        if let Some(src_dir) = job.figure_dir {
            for name in &figures {
                let src = src_dir.join(name);
                std::fs::copy(&src, files_dir.join(name)).map_err(io_err(&src))?;
            }
        }
        if let (Some(logo), Some(name)) = (logo, &logo_name) {
            std::fs::copy(logo, files_dir.join(name)).map_err(io_err(logo))?;
        }
    }
    let mut written = Vec::new();
    for (path, html) in rendered {
        std::fs::write(&path, html).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
