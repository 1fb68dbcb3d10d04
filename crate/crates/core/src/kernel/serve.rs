use std::io::{self, BufRead, Write};

use super::protocol::Message;
use super::{Control, KernelHandler};

/// Runs `handler` as a line-oriented kernel process. Returns the exit
/// status: the handler's on shutdown, 0 at end of input, 1 on a malformed
/// request.
pub fn serve(
    handler: &mut dyn KernelHandler,
    input: impl BufRead,
    mut output: impl Write,
) -> io::Result<i32> {
    let mut replies = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let msg = match Message::decode(&line) {
            Ok(msg) => msg,
            Err(e) => {
                eprintln!("kernel: malformed request: {e}");
                return Ok(1);
            }
        };
        replies.clear();
        let control = handler.handle(msg, &mut replies);
        for reply in &replies {
            writeln!(output, "{}", reply.encode())?;
        }
        output.flush()?;
        if let Control::Exit(code) = control {
            return Ok(code);
        }
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::calc::CalcKernel;

    #[test]
    fn answers_line_by_line() {
        let input = concat!(
            r#"{"type":"hello","id":0,"version":1}"#,
            "\n",
            r#"{"type":"exec","id":1,"code":"2*21","fig_width":7,"fig_height":5,"label":"a"}"#,
            "\n",
            r#"{"type":"shutdown","id":2}"#,
            "\n",
            r#"{"type":"eval","id":3,"expr":"1"}"#,
            "\n"
        );
        let mut out = Vec::new();
        let code = serve(&mut CalcKernel::new(), input.as_bytes(), &mut out).unwrap();
        assert_eq!(code, 0);
        assert_eq!(
            String::from_utf8(out).unwrap(),
            concat!(
                r#"{"type":"hello","id":0,"version":1,"langs":["calc"]}"#,
                "\n",
                r#"{"type":"value","id":1,"text":"42"}"#,
                "\n",
                r#"{"type":"done","id":1,"status":"ok"}"#,
                "\n"
            )
        );
    }

    #[test]
    fn junk_is_fatal() {
        let mut out = Vec::new();
        assert_eq!(
            serve(&mut CalcKernel::new(), "{oops\n".as_bytes(), &mut out).unwrap(),
            1
        );
        assert!(out.is_empty());
    }
}
