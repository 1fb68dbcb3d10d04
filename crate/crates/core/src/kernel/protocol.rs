//! Wire messages: one JSON object per line. See `docs/protocol.md`.

use serde::{Deserialize, Serialize};

use super::result::{ExecStatus, FigureFormat, Stream};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello {
        id: u64,
        version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        figure_dir: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        langs: Option<Vec<String>>,
    },
    Exec {
        id: u64,
        code: String,
        fig_width: f64,
        fig_height: f64,
        label: String,
    },
    Output {
        id: u64,
        stream: Stream,
        text: String,
    },
    Figure {
        id: u64,
        path: String,
        format: FigureFormat,
        width: f64,
        height: f64,
    },
    Table {
        id: u64,
        header: Vec<String>,
        rows: Vec<Vec<String>>,
    },
    Value {
        id: u64,
        text: String,
    },
    Done {
        id: u64,
        status: ExecStatus,
    },
    Eval {
        id: u64,
        expr: String,
    },
    EvalResult {
        id: u64,
        status: ExecStatus,
        text: String,
    },
    Shutdown {
        id: u64,
    },
}

impl Message {
    pub fn id(&self) -> u64 {
        match self {
            Message::Hello { id, .. }
            | Message::Exec { id, .. }
            | Message::Output { id, .. }
            | Message::Figure { id, .. }
            | Message::Table { id, .. }
            | Message::Value { id, .. }
            | Message::Done { id, .. }
            | Message::Eval { id, .. }
            | Message::EvalResult { id, .. }
            | Message::Shutdown { id } => *id,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::Exec { .. } => "exec",
            Message::Output { .. } => "output",
            Message::Figure { .. } => "figure",
            Message::Table { .. } => "table",
            Message::Value { .. } => "value",
            Message::Done { .. } => "done",
            Message::Eval { .. } => "eval",
            Message::EvalResult { .. } => "eval_result",
            Message::Shutdown { .. } => "shutdown",
        }
    }

    /// One line of wire text, without the trailing newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("messages always serialize")
    }

    pub fn decode(line: &str) -> Result<Message, String> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n'])).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bit_exact_lines() {
        let exec = Message::Exec {
            id: 3,
            code: "x = 2\nx + 3".into(),
            fig_width: 4.0,
            fig_height: 3.0,
            label: "setup".into(),
        };
        assert_eq!(
            exec.encode(),
            r#"{"type":"exec","id":3,"code":"x = 2\nx + 3","fig_width":4.0,"fig_height":3.0,"label":"setup"}"#
        );
        let hello = Message::Hello {
            id: 0,
            version: 1,
            figure_dir: Some("/tmp/f".into()),
            langs: None,
        };
        assert_eq!(
            hello.encode(),
            r#"{"type":"hello","id":0,"version":1,"figure_dir":"/tmp/f"}"#
        );
        assert_eq!(
            Message::Shutdown { id: 9 }.encode(),
            r#"{"type":"shutdown","id":9}"#
        );
        assert_eq!(
            Message::Output {
                id: 1,
                stream: Stream::Stdout,
                text: "hi".into()
            }
            .encode(),
            r#"{"type":"output","id":1,"stream":"stdout","text":"hi"}"#
        );
    }

    #[test]
    fn decode_accepts_integers_for_reals_and_rejects_junk() {
        let msg = Message::decode(
            r#"{"type":"figure","id":2,"path":"a-1.svg","format":"svg","width":4,"height":3}"#,
        )
        .unwrap();
        assert_eq!(msg.id(), 2);
        assert!(Message::decode("not json").is_err());
        assert!(Message::decode(r#"{"type":"launch","id":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode(id in any::<u64>(), text in any::<String>(), stream in 0..5u8) {
            let stream = [Stream::Stdout, Stream::Value, Stream::Message, Stream::Warning, Stream::Error][stream as usize];
            let msg = Message::Output { id, stream, text };
            let line = msg.encode();
            prop_assert!(!line.contains('\n'));
            prop_assert_eq!(Message::decode(&line).unwrap(), msg);
        }
    }
}
