//! Slideshow output: a title slide, then one slide per level-2 heading.

use std::fmt::Write as _;

use thiserror::Error;

use super::themes::{SLIDES_CSS, SLIDES_JS};
use super::{escape, has_math, head, title_block, BodyWriter, RenderConfig};
use crate::front_matter::Transition;
use crate::markdown::{Block, BlockKind};
use crate::weave::WovenDocument;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("document has no level-2 headings to split into slides")]
pub struct NoSlides;

/// A content slide. `heading` is the level-2 heading that opened it; only
/// the slide holding material before the first such heading has none.
#[derive(Debug, Clone, PartialEq)]
pub struct Slide {
    pub heading: Option<Block>,
    pub body: Vec<Block>,
}

impl Slide {
    pub fn classes(&self) -> Vec<String> {
        match &self.heading {
            Some(Block {
                kind: BlockKind::Heading { attrs, .. },
                ..
            }) => attrs.clone(),
            _ => Vec::new(),
        }
    }

    /// The heading followed by the body.
    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.heading.iter().chain(self.body.iter())
    }
}

fn is_break(block: &Block) -> bool {
    matches!(block.kind, BlockKind::Heading { level: 2, .. })
}

pub fn split_slides(blocks: &[Block]) -> Result<Vec<Slide>, NoSlides> {
    if !blocks.iter().any(is_break) {
        return Err(NoSlides);
    }
    let mut slides: Vec<Slide> = Vec::new();
    for block in blocks {
        if is_break(block) {
            slides.push(Slide {
                heading: Some(block.clone()),
                body: Vec::new(),
            });
        } else {
            match slides.last_mut() {
                Some(slide) => slide.body.push(block.clone()),
                None => slides.push(Slide {
                    heading: None,
                    body: vec![block.clone()],
                }),
            }
        }
    }
    Ok(slides)
}

pub fn transition_seconds(t: Transition) -> &'static str {
    match t {
        Transition::Default => "0.4s",
        Transition::Slower => "0.8s",
        Transition::Faster => "0.2s",
    }
}

pub fn render_slides(doc: &WovenDocument, cfg: &RenderConfig) -> Result<String, NoSlides> {
    let slides = split_slides(&doc.blocks)?;
    let mut vars = format!(
        "{} --transition: {};",
        cfg.theme_vars(),
        transition_seconds(cfg.transition)
    );
    if let Some(size) = &cfg.text_size {
        let _ = write!(vars, " --text-size: {};", css_value(size));
    }
    if let Some(bullet) = &cfg.bullet {
        let _ = write!(vars, " --bullet: {};", css_value(bullet));
    }
    let style = format!(":root {{ {vars} }}\n{SLIDES_CSS}");
    let mut out = head(doc.front.title.as_deref(), &style, has_math(&doc.blocks));
    let body_class = if cfg.widescreen {
        "deck widescreen"
    } else {
        "deck"
    };
    let _ = writeln!(out, "<body class=\"{body_class}\">");

    out.push_str("<section class=\"slide title-slide\" id=\"slide-0\">\n");
    title_block(doc, &mut out);
    let logo_src = cfg
        .logo
        .as_ref()
        .map(|logo| format!("{}/{}", escape(&cfg.files_dir), escape(logo)));
    if let Some(src) = &logo_src {
        let _ = writeln!(out, "<img class=\"logo\" src=\"{src}\" alt=\"logo\">");
    }
    out.push_str("</section>\n");

    let mut body = BodyWriter::new(cfg, &doc.blocks);
    for (i, slide) in slides.iter().enumerate() {
        let mut class = String::from("slide");
        for c in slide.classes() {
            class.push(' ');
            class.push_str(&c);
        }
        let _ = writeln!(
            out,
            "<section class=\"{}\" id=\"slide-{}\">",
            escape(&class),
            i + 1
        );
        for block in slide.blocks() {
            body.block(block);
        }
        out.push_str(&std::mem::take(&mut body.out));
        if let Some(src) = &logo_src {
            let _ = writeln!(
                out,
                "<footer class=\"slide-footer\"><img src=\"{src}\" alt=\"logo\"></footer>"
            );
        }
        out.push_str("</section>\n");
    }
    let _ = write!(out, "<script>\n{SLIDES_JS}</script>\n</body>\n</html>\n");
    Ok(out)
}

/// Keeps a header value from closing the CSS declaration.
fn css_value(value: &str) -> String {
    value
        .chars()
        .filter(|c| !matches!(c, ';' | '{' | '}' | '<' | '>'))
        .collect()
}
