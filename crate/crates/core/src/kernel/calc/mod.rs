//! The builtin `calc` kernel: the calc language behind the wire protocol.

mod lang;

use std::fmt::Write as _;
use std::path::PathBuf;

pub use lang::{format_number, CalcError, Effects, Interpreter, Value};

use super::protocol::{Message, PROTOCOL_VERSION};
use super::result::{ExecStatus, FigureFormat, Stream};
use super::{Control, KernelHandler};

/// Pixels per display inch in generated SVG.
pub const SVG_DPI: f64 = 96.0;

pub struct CalcKernel {
    langs: Vec<String>,
    interp: Interpreter,
    figure_dir: Option<PathBuf>,
}

impl CalcKernel {
    pub fn new() -> Self {
        Self::with_langs(vec!["calc".to_string()])
    }

    /// A calc kernel that answers to other language names too.
    pub fn with_langs(langs: Vec<String>) -> Self {
        Self {
            langs,
            interp: Interpreter::new(),
            figure_dir: None,
        }
    }
}

impl Default for CalcKernel {
    fn default() -> Self {
        Self::new()
    }
}

struct ExecSink<'a> {
    id: u64,
    out: &'a mut Vec<Message>,
    figure_dir: Option<&'a PathBuf>,
    label: &'a str,
    width: f64,
    height: f64,
    figures: usize,
}

impl Effects for ExecSink<'_> {
    fn stdout(&mut self, text: String) {
        self.segment(Stream::Stdout, text);
    }

    fn message(&mut self, text: String) {
        self.segment(Stream::Message, text);
    }

    fn warning(&mut self, text: String) {
        self.segment(Stream::Warning, text);
    }

    fn plot(&mut self, xs: Vec<f64>, ys: Vec<f64>) -> Result<(), String> {
        let dir = self
            .figure_dir
            .ok_or_else(|| "no figure directory was given at handshake".to_string())?;
        self.figures += 1;
        let name = format!("{}-{}.svg", self.label, self.figures);
        let svg = render_svg(&xs, &ys, self.width, self.height);
        std::fs::write(dir.join(&name), svg).map_err(|e| format!("cannot write figure: {e}"))?;
        self.out.push(Message::Figure {
            id: self.id,
            path: name,
            format: FigureFormat::Svg,
            width: self.width,
            height: self.height,
        });
        Ok(())
    }

    fn table(&mut self, header: Vec<String>, rows: Vec<Vec<String>>) {
        self.out.push(Message::Table {
            id: self.id,
            header,
            rows,
        });
    }
}

impl ExecSink<'_> {
    fn segment(&mut self, stream: Stream, text: String) {
        self.out.push(Message::Output {
            id: self.id,
            stream,
            text,
        });
    }
}

/// Discards effects; inline expressions must be pure.
struct NoEffects;

impl Effects for NoEffects {
    fn stdout(&mut self, _: String) {}
    fn message(&mut self, _: String) {}
    fn warning(&mut self, _: String) {}
    fn plot(&mut self, _: Vec<f64>, _: Vec<f64>) -> Result<(), String> {
        Err("plot() is not available inline".into())
    }
    fn table(&mut self, _: Vec<String>, _: Vec<Vec<String>>) {}
}

impl KernelHandler for CalcKernel {
    fn handle(&mut self, msg: Message, out: &mut Vec<Message>) -> Control {
        match msg {
            Message::Hello { id, figure_dir, .. } => {
                self.figure_dir = figure_dir.map(PathBuf::from);
                out.push(Message::Hello {
                    id,
                    version: PROTOCOL_VERSION,
                    figure_dir: None,
                    langs: Some(self.langs.clone()),
                });
            }
            Message::Exec {
                id,
                code,
                fig_width,
                fig_height,
                label,
            } => {
                let mut sink = ExecSink {
                    id,
                    out,
                    figure_dir: self.figure_dir.as_ref(),
                    label: &label,
                    width: fig_width,
                    height: fig_height,
                    figures: 0,
                };
                let status = match self.interp.run(&code, &mut sink) {
                    Ok(Value::Nil) => ExecStatus::Ok,
                    Ok(value) => {
                        sink.out.push(Message::Value {
                            id,
                            text: value.to_string(),
                        });
                        ExecStatus::Ok
                    }
                    Err(err) => {
                        sink.segment(Stream::Error, format!("Error: {}", err.message));
                        ExecStatus::Error
                    }
                };
                out.push(Message::Done { id, status });
            }
            Message::Eval { id, expr } => {
                let (status, text) = match self.interp.eval_expr(&expr, &mut NoEffects) {
                    Ok(value) => (ExecStatus::Ok, value.to_string()),
                    Err(err) => (ExecStatus::Error, err.message),
                };
                out.push(Message::EvalResult { id, status, text });
            }
            Message::Shutdown { .. } => return Control::Exit(0),
            other => {
                log::error!("calc kernel: unexpected '{}' message", other.type_name());
                return Control::Exit(1);
            }
        }
        Control::Continue
    }
}

/// A polyline on a white canvas, sized `width` x `height` inches.
pub fn render_svg(xs: &[f64], ys: &[f64], width: f64, height: f64) -> String {
    let w = width * SVG_DPI;
    let h = height * SVG_DPI;
    let pad = 0.1;
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo && (hi - lo).is_finite() {
            (lo, hi - lo)
        } else {
            (lo - 1.0, 2.0)
        }
    };
    let (x0, dx) = span(xs);
    let (y0, dy) = span(ys);
    let mut points = String::new();
    for (x, y) in xs.iter().zip(ys) {
        let px = w * (pad + (1.0 - 2.0 * pad) * (x - x0) / dx);
        let py = h * (1.0 - pad - (1.0 - 2.0 * pad) * (y - y0) / dy);
        if !points.is_empty() {
            points.push(' ');
        }
        let _ = write!(points, "{:.2},{:.2}", finite(px), finite(py));
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <polyline fill=\"none\" stroke=\"black\" stroke-width=\"2\" points=\"{points}\"/>\n\
         </svg>\n"
    )
}

fn finite(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exchange(kernel: &mut CalcKernel, msg: Message) -> Vec<Message> {
        let mut out = Vec::new();
        assert_eq!(kernel.handle(msg, &mut out), Control::Continue);
        out
    }

    fn exec(id: u64, code: &str) -> Message {
        Message::Exec {
            id,
            code: code.into(),
            fig_width: 4.0,
            fig_height: 3.0,
            label: "c".into(),
        }
    }

    #[test]
    fn value_then_done() {
        let mut k = CalcKernel::new();
        assert_eq!(
            exchange(&mut k, exec(1, "x = 2\nx + 3")),
            vec![
                Message::Value {
                    id: 1,
                    text: "5".into()
                },
                Message::Done {
                    id: 1,
                    status: ExecStatus::Ok
                }
            ]
        );
    }

    #[test]
    fn error_segment_then_error_done() {
        let mut k = CalcKernel::new();
        let out = exchange(&mut k, exec(4, "print(1)\n1/0"));
        assert_eq!(
            out,
            vec![
                Message::Output {
                    id: 4,
                    stream: Stream::Stdout,
                    text: "1".into()
                },
                Message::Output {
                    id: 4,
                    stream: Stream::Error,
                    text: "Error: division by zero".into()
                },
                Message::Done {
                    id: 4,
                    status: ExecStatus::Error
                }
            ]
        );
    }

    #[test]
    fn eval_uses_chunk_state() {
        let mut k = CalcKernel::new();
        exchange(&mut k, exec(1, "n = 50"));
        assert_eq!(
            exchange(
                &mut k,
                Message::Eval {
                    id: 2,
                    expr: "n".into()
                }
            ),
            vec![Message::EvalResult {
                id: 2,
                status: ExecStatus::Ok,
                text: "50".into()
            }]
        );
    }

    #[test]
    fn plot_writes_named_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut k = CalcKernel::new();
        exchange(
            &mut k,
            Message::Hello {
                id: 0,
                version: 1,
                figure_dir: Some(dir.path().display().to_string()),
                langs: None,
            },
        );
        let out = exchange(&mut k, exec(1, "plot([1, 3, 2])\nplot([1, 2])"));
        assert!(
            matches!(&out[0], Message::Figure { path, width, .. } if path == "c-1.svg" && *width == 4.0)
        );
        assert!(matches!(&out[1], Message::Figure { path, .. } if path == "c-2.svg"));
        let svg = std::fs::read_to_string(dir.path().join("c-1.svg")).unwrap();
        assert!(svg
            .starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"384\" height=\"288\""));
    }

    #[test]
    fn svg_is_deterministic() {
        assert_eq!(
            render_svg(&[1.0, 2.0], &[5.0, 5.0], 1.0, 1.0),
            render_svg(&[1.0, 2.0], &[5.0, 5.0], 1.0, 1.0)
        );
    }
}
