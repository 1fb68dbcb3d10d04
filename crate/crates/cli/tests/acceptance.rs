//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Runs with the builtin calc kernel only.

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weave_core::html::{render_body, render_document, split_slides, RenderConfig};
use weave_core::kernel::{KernelRegistry, Timeouts};
use weave_core::markdown::tags::is_balanced;
use weave_core::markdown::{parse_document, Block, ParseOptions};
use weave_core::render::{execute, prepare, weave_prepared, RenderError, RenderOptions};
use weave_core::weave::WovenDocument;

use support::{corpus_dir, fixture, render_source, render_to, run, weave};

/// Time budgets, where a criterion states one.
const FIG1_BUDGET: Duration = Duration::from_secs(1);
const TRUTH_TABLE_BUDGET: Duration = Duration::from_secs(1);
const MIN_CORPUS: usize = 40;
const FUZZ_CASES: usize = 10_000;
const FUZZ_SEED: u64 = 0x5eed_f00d;

type Outcome = Result<String, String>;

struct Criterion {
    id: &'static str,
    name: &'static str,
    budget: Option<Duration>,
    check: fn() -> Outcome,
}

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn tempdir() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(|e| e.to_string())
}

fn fig1_golden() -> Outcome {
    let out = tempdir()?;
    let report = render_to(&fixture("homework.md"), out.path()).map_err(|e| e.to_string())?;
    let html = read(&report.written[0])?;
    let golden = read(&fixture("homework.html"))?;
    ensure(html == golden, || {
        "output differs from tests/fixtures/homework.html".into()
    })?;

    ensure(!html.contains("<pre class=\"stream-message\">"), || {
        "setup message is visible".into()
    })?;
    // Every output block sits right after the code that produced it.
    let outputs = html.matches("<div class=\"chunk-output\">").count();
    let adjacent = html
        .matches("</code></pre>\n<div class=\"chunk-output\">")
        .count();
    ensure(outputs > 0 && outputs == adjacent, || {
        format!("{adjacent} of {outputs} output blocks follow their code")
    })?;
    ensure(
        html.contains(
            "<img src=\"homework_files/helpful_visual-1.svg\" width=\"384\" height=\"288\"",
        ),
        || "figure is not 4in x 3in at 96 px/in".into(),
    )?;
    ensure(
        out.path()
            .join("homework_files/helpful_visual-1.svg")
            .is_file(),
        || "figure file missing".into(),
    )?;
    Ok("byte-exact; message hidden; outputs adjacent; figure 384x288".into())
}

fn truth_table() -> Outcome {
    let dir = tempdir()?;
    let mut cases = 0;
    for bits in 0..16u8 {
        let echo = bits & 1 != 0;
        let include = bits & 2 != 0;
        let markup = bits & 4 != 0;
        let message = bits & 8 != 0;
        let tf = |b: bool| if b { "TRUE" } else { "FALSE" };
        let source = format!(
            "```{{calc case, echo={}, include={}, results='{}', message={}}}\n\
             v = 41\nprint(\"out\")\nmessage(\"note\")\n```\n\n\
             ```{{calc after}}\nv + 1\n```\n",
            tf(echo),
            tf(include),
            if markup { "markup" } else { "hide" },
            tf(message),
        );
        let html = render_source(dir.path(), &format!("case{bits}.md"), &source)
            .map_err(|e| e.to_string())?;

        let want_code = include && echo;
        let want_output = include && markup;
        let want_message = want_output && message;
        let got_code = html.contains("<code class=\"language-calc\">v = 41");
        let got_output = html.contains("<pre class=\"stream-stdout\"><code>out</code></pre>");
        let got_message = html.contains("<pre class=\"stream-message\"><code>note</code></pre>");
        let state_seen = html.contains("<pre class=\"stream-value\"><code>42</code></pre>");
        ensure(
            (got_code, got_output, got_message) == (want_code, want_output, want_message)
                && state_seen,
            || {
                format!(
                    "echo={echo} include={include} markup={markup} message={message}: \
                     code={got_code} output={got_output} message={got_message} later_chunk_saw_v={state_seen}"
                )
            },
        )?;
        cases += 1;
    }
    Ok(format!(
        "{cases}/16 combinations; include=FALSE still sets state"
    ))
}

fn inline_value() -> Outcome {
    let out = tempdir()?;
    let report = render_to(&fixture("inline.md"), out.path()).map_err(|e| e.to_string())?;
    let html = read(&report.written[0])?;
    let want = "<p>The data has 50 rows.</p>";
    ensure(html.contains(want), || format!("missing {want:?}"))?;
    ensure(
        !html.contains("<code>50</code>") && !html.contains("n = 50"),
        || "value or hidden chunk leaked into a code element".into(),
    )?;
    Ok(format!("found {want:?}"))
}

fn fresh_workspace() -> Outcome {
    let first = tempdir()?;
    let second = tempdir()?;
    let a = render_to(&fixture("homework.md"), first.path()).map_err(|e| e.to_string())?;
    let b = render_to(&fixture("homework.md"), second.path()).map_err(|e| e.to_string())?;
    ensure(read(&a.written[0])? == read(&b.written[0])?, || {
        "HTML differs between renders".into()
    })?;
    let fig = "homework_files/helpful_visual-1.svg";
    ensure(
        read(&first.path().join(fig))? == read(&second.path().join(fig))?,
        || "figure differs between renders".into(),
    )?;

    let scratch = tempdir()?;
    for round in 1..=2 {
        render_to(&fixture("leak.md"), scratch.path())
            .map_err(|e| format!("round {round}: {e}"))?;
        match render_to(&fixture("probe.md"), scratch.path()) {
            Err(RenderError::ChunkFailed { label, message, .. })
                if label == "probe" && message.contains("leaked") => {}
            Err(other) => return Err(format!("round {round}: probe failed unexpectedly: {other}")),
            Ok(_) => {
                return Err(format!(
                    "round {round}: probe saw a variable from another render"
                ))
            }
        }
    }
    Ok("two renders byte-identical; probe fails in both rounds".into())
}

/// Same pipeline as the core golden test: weave, then render the body.
fn corpus_body(path: &Path) -> Result<String, String> {
    let registry = KernelRegistry::with_builtins();
    let mut prepared =
        prepare(path, &registry, &RenderOptions::default()).map_err(|e| e.to_string())?;
    let figures = tempdir()?;
    let executed = execute(&prepared, &registry, figures.path(), Timeouts::default())
        .map_err(|e| e.to_string())?;
    let woven = weave_prepared(&mut prepared, &executed, false).map_err(|e| e.to_string())?;
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    Ok(render_body(
        &woven.blocks,
        &RenderConfig::document(&format!("{stem}_files")),
    ))
}

fn corpus_inputs() -> Result<Vec<std::path::PathBuf>, String> {
    let dir = corpus_dir();
    let mut inputs: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "md"))
        .collect();
    inputs.sort();
    Ok(inputs)
}

fn render_bytes(bytes: &[u8]) -> Result<(), String> {
    let text = String::from_utf8_lossy(bytes);
    let Ok(doc) = parse_document(&text, &ParseOptions::default()) else {
        return Ok(());
    };
    let woven = WovenDocument {
        front: doc.front,
        blocks: doc.blocks,
        warnings: Vec::new(),
    };
    let html = render_document(&woven, &RenderConfig::document("fuzz_files"));
    ensure(is_balanced(&html), || {
        format!("unbalanced output for input {text:?}")
    })
}

fn corpus_and_fuzz() -> Outcome {
    let inputs = corpus_inputs()?;
    ensure(inputs.len() >= MIN_CORPUS, || {
        format!("only {} corpus documents", inputs.len())
    })?;
    for input in &inputs {
        let got = corpus_body(input)?;
        let want = read(&input.with_extension("html"))?;
        ensure(got == want, || {
            format!("{} differs from its golden", input.display())
        })?;
        ensure(is_balanced(&got), || {
            format!("{} renders unbalanced", input.display())
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(FUZZ_SEED);
    for case in 0..FUZZ_CASES {
        let len = rng.gen_range(0..256);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        match catch_unwind(AssertUnwindSafe(|| render_bytes(&bytes))) {
            Ok(Ok(())) => {}
            Ok(Err(why)) => return Err(format!("fuzz case {case}: {why}")),
            Err(_) => return Err(format!("fuzz case {case}: panic on {bytes:?}")),
        }
    }
    Ok(format!(
        "{} golden pairs match; {FUZZ_CASES} random inputs parsed and rendered balanced",
        inputs.len()
    ))
}

fn slides() -> Outcome {
    let out = tempdir()?;
    let report = render_to(&fixture("slides.md"), out.path()).map_err(|e| e.to_string())?;
    let html = read(&report.written[0])?;
    let sections: Vec<&str> = html
        .match_indices("<section class=\"")
        .map(|(at, _)| html[at..].split('>').next().unwrap_or_default())
        .collect();
    let want = [
        "<section class=\"slide title-slide\" id=\"slide-0\"",
        "<section class=\"slide\" id=\"slide-1\"",
        "<section class=\"slide flexbox vcenter\" id=\"slide-2\"",
        "<section class=\"slide\" id=\"slide-3\"",
        "<section class=\"slide\" id=\"slide-4\"",
    ];
    ensure(sections == want, || {
        format!("slide sections were {sections:?}")
    })?;
    ensure(
        html.contains("<h1 class=\"title\">Field Notes</h1>"),
        || "title slide lacks the title".into(),
    )?;

    let mut partitioned = 0;
    for input in corpus_inputs()? {
        let blocks = woven_blocks(&input)?;
        if let Ok(slides) = split_slides(&blocks) {
            let rejoined: Vec<Block> = slides.iter().flat_map(|s| s.blocks().cloned()).collect();
            ensure(rejoined == blocks, || {
                format!("{}: slides do not partition the document", input.display())
            })?;
            partitioned += 1;
        }
    }
    ensure(partitioned > 0, || "no corpus document has slides".into())?;
    Ok(format!(
        "title + 4 slides with classes; partition holds on {partitioned} corpus documents"
    ))
}

fn woven_blocks(path: &Path) -> Result<Vec<Block>, String> {
    let registry = KernelRegistry::with_builtins();
    let mut prepared =
        prepare(path, &registry, &RenderOptions::default()).map_err(|e| e.to_string())?;
    let figures = tempdir()?;
    let executed = execute(&prepared, &registry, figures.path(), Timeouts::default())
        .map_err(|e| e.to_string())?;
    Ok(weave_prepared(&mut prepared, &executed, false)
        .map_err(|e| e.to_string())?
        .blocks)
}

fn error_pinpointing() -> Outcome {
    let out = tempdir()?;
    let (code, _, stderr) = run(weave()
        .arg("render")
        .arg(fixture("divide.md"))
        .arg("--output-dir")
        .arg(out.path()));
    let stderr = stderr.trim().to_string();
    ensure(code == 2, || format!("exit code {code}: {stderr}"))?;
    ensure(
        stderr.contains("model") && stderr.contains("divide.md:11:"),
        || format!("diagnostic lacks chunk name or line 11: {stderr}"),
    )?;
    ensure(!out.path().join("divide.html").exists(), || {
        "partial output written".into()
    })?;
    Ok(format!("exit 2: {stderr}"))
}

fn citations() -> Outcome {
    let out = tempdir()?;
    let report = render_to(&fixture("cite.md"), out.path()).map_err(|e| e.to_string())?;
    let html = read(&report.written[0])?;
    let refs: Vec<&str> = html
        .lines()
        .filter(|l| l.starts_with("<p class=\"reference\""))
        .collect();
    let want = [
        "<p class=\"reference\" id=\"ref-beta2002\">Beta 2002. Second Book.</p>",
        "<p class=\"reference\" id=\"ref-alpha2001\">Alpha 2001. First Paper.</p>",
    ];
    ensure(refs == want, || format!("reference lines were {refs:?}"))?;

    let (code, _, stderr) = run(weave()
        .arg("render")
        .arg(fixture("unknown-cite.md"))
        .arg("--strict")
        .arg("--output-dir")
        .arg(out.path()));
    ensure(code == 1, || {
        format!("--strict with unknown key exited {code}: {stderr}")
    })?;
    Ok("2 of 3 entries listed in first-citation order; --strict unknown key exits 1".into())
}

fn output_blocks(html: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut rest = html;
    while let Some(at) = rest.find("<div class=\"chunk-output\">") {
        let end = rest[at..]
            .find("</div>")
            .map_or(rest.len(), |e| at + e + "</div>".len());
        blocks.push(rest[at..end].to_string());
        rest = &rest[end..];
    }
    blocks
}

fn deferred_appendix() -> Outcome {
    let dir = tempdir()?;
    let source = read(&fixture("appendix.md"))?;
    let deferred = render_source(dir.path(), "deferred.md", &source).map_err(|e| e.to_string())?;
    let inline = render_source(
        dir.path(),
        "inline.md",
        &source.replace(", defer_output=TRUE", ""),
    )
    .map_err(|e| e.to_string())?;

    let heading = "<h2 id=\"appendix\">Appendix</h2>";
    let at = deferred.find(heading).ok_or("no Appendix heading")?;
    let (main, appendix) = deferred.split_at(at);
    ensure(
        !appendix[heading.len()..].contains("<h1") && !appendix[heading.len()..].contains("<h2"),
        || "Appendix is not the trailing section".into(),
    )?;
    for text in ["deferred one", "deferred two", "check residuals"] {
        let code = format!("<code>{text}</code>");
        ensure(appendix.contains(&code) && !main.contains(&code), || {
            format!("{text:?} is not only in the appendix")
        })?;
    }
    ensure(main.contains("<code>shown inline</code>"), || {
        "undeferred output moved".into()
    })?;

    let mut with = output_blocks(&deferred);
    let mut without = output_blocks(&inline);
    with.sort();
    without.sort();
    ensure(with == without, || {
        "output blocks gained or lost by deferring".into()
    })?;
    Ok(format!(
        "{} output blocks conserved; 2 chunks deferred",
        with.len()
    ))
}

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: "A1",
            name: "homework document golden",
            budget: Some(FIG1_BUDGET),
            check: fig1_golden,
        },
        Criterion {
            id: "A2",
            name: "chunk option truth table",
            budget: Some(TRUTH_TABLE_BUDGET),
            check: truth_table,
        },
        Criterion {
            id: "A3",
            name: "inline evaluation",
            budget: None,
            check: inline_value,
        },
        Criterion {
            id: "A4",
            name: "fresh workspace per render",
            budget: None,
            check: fresh_workspace,
        },
        Criterion {
            id: "A5",
            name: "markdown corpus and fuzzing",
            budget: None,
            check: corpus_and_fuzz,
        },
        Criterion {
            id: "A6",
            name: "slides",
            budget: None,
            check: slides,
        },
        Criterion {
            id: "A7",
            name: "error pinpointing",
            budget: None,
            check: error_pinpointing,
        },
        Criterion {
            id: "A8",
            name: "citations",
            budget: None,
            check: citations,
        },
        Criterion {
            id: "A9",
            name: "deferred appendix",
            budget: None,
            check: deferred_appendix,
        },
    ]
}

fn main() -> ExitCode {
    let mut failed = 0;
    for c in criteria() {
        let start = Instant::now();
        let outcome = catch_unwind(c.check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(budget)) if elapsed > budget => {
                Err(format!("took {elapsed:.2?}, budget {budget:.2?}"))
            }
            (o, _) => o,
        };
        let ms = elapsed.as_millis();
        match outcome {
            Ok(detail) => println!("PASS {} {} ({ms} ms): {detail}", c.id, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {} ({ms} ms): {why}", c.id, c.name);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
