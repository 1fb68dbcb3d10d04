use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Stdout,
    Value,
    Message,
    Warning,
    Error,
}

impl Stream {
    pub fn name(self) -> &'static str {
        match self {
            Stream::Stdout => "stdout",
            Stream::Value => "value",
            Stream::Message => "message",
            Stream::Warning => "warning",
            Stream::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Segment {
    pub stream: Stream,
    pub text: String,
}

impl Segment {
    pub fn new(stream: Stream, text: impl Into<String>) -> Self {
        Self {
            stream,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureFormat {
    Png,
    Svg,
}

impl FigureFormat {
    pub fn extension(self) -> &'static str {
        match self {
            FigureFormat::Png => "png",
            FigureFormat::Svg => "svg",
        }
    }
}

/// A figure file inside the render's figure directory.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureRef {
    /// File name, `<chunk-label>-<k>.<ext>`.
    pub name: String,
    pub format: FigureFormat,
    /// Display units (inches).
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StructuredTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Segment(Segment),
    Figure(FigureRef),
    Table(StructuredTable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecStatus {
    Ok,
    Error,
}

/// Everything one chunk produced, in emission order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkResult {
    pub artifacts: Vec<Artifact>,
    pub status: ExecStatus,
}

impl ChunkResult {
    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.artifacts.iter().filter_map(|a| match a {
            Artifact::Segment(s) => Some(s),
            _ => None,
        })
    }

    pub fn figures(&self) -> impl Iterator<Item = &FigureRef> {
        self.artifacts.iter().filter_map(|a| match a {
            Artifact::Figure(f) => Some(f),
            _ => None,
        })
    }

    pub fn tables(&self) -> impl Iterator<Item = &StructuredTable> {
        self.artifacts.iter().filter_map(|a| match a {
            Artifact::Table(t) => Some(t),
            _ => None,
        })
    }

    /// Text of the error segments, joined by newlines.
    pub fn error_text(&self) -> Option<String> {
        let errors: Vec<&str> = self
            .segments()
            .filter(|s| s.stream == Stream::Error)
            .map(|s| s.text.as_str())
            .collect();
        (!errors.is_empty()).then(|| errors.join("\n"))
    }
}
