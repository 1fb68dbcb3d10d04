//! Built-in themes. Each theme is a set of CSS custom properties layered
//! over the shared base stylesheet.

pub const THEMES: &[(&str, &str)] = &[
    (
        "default",
        "--bg: #ffffff; --fg: #222222; --accent: #2a6099; --code-bg: #f5f5f5; --font: Georgia, 'Times New Roman', serif;",
    ),
    (
        "cerulean",
        "--bg: #ffffff; --fg: #333333; --accent: #2fa4e7; --code-bg: #eef6fb; --font: 'Helvetica Neue', Arial, sans-serif;",
    ),
    (
        "journal",
        "--bg: #fffdf8; --fg: #1a1a1a; --accent: #eb6864; --code-bg: #f7f3ea; --font: 'Palatino Linotype', Palatino, serif;",
    ),
    (
        "flatly",
        "--bg: #ffffff; --fg: #2c3e50; --accent: #18bc9c; --code-bg: #ecf0f1; --font: Lato, 'Helvetica Neue', sans-serif;",
    ),
    (
        "dark",
        "--bg: #1e1e1e; --fg: #e0e0e0; --accent: #79b8ff; --code-bg: #2d2d2d; --font: 'Helvetica Neue', Arial, sans-serif;",
    ),
];

pub fn theme_vars(name: &str) -> Option<&'static str> {
    THEMES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, vars)| *vars)
}

pub fn is_known(name: &str) -> bool {
    theme_vars(name).is_some()
}

pub const BASE_CSS: &str = "\
body { margin: 0; background: var(--bg); color: var(--fg); font-family: var(--font); line-height: 1.5; }
.container { max-width: 46em; margin: 0 auto; padding: 2em 1em; }
a { color: var(--accent); }
h1, h2, h3, h4, h5, h6 { line-height: 1.2; }
#title-block { margin-bottom: 2em; }
#title-block .title { margin-bottom: 0.2em; }
#title-block .author, #title-block .date { margin: 0.2em 0; font-style: italic; }
#TOC { border-left: 3px solid var(--accent); padding-left: 1em; margin-bottom: 2em; }
#TOC ul { list-style: none; padding-left: 0; }
#TOC .toc-level-2 { padding-left: 1em; }
#TOC .toc-level-3 { padding-left: 2em; }
pre { background: var(--code-bg); padding: 0.6em 0.8em; overflow-x: auto; }
pre.fixed { border: 1px solid #cccccc; }
.chunk-output pre { background: transparent; border-left: 3px solid var(--code-bg); margin: 0.3em 0; }
.stream-message { color: #555555; }
.stream-warning { color: #a36200; }
.stream-error { color: #b00020; }
table { border-collapse: collapse; margin: 1em 0; }
th, td { padding: 0.25em 0.75em; border-bottom: 1px solid #cccccc; text-align: left; }
blockquote { border-left: 3px solid #cccccc; margin-left: 0; padding-left: 1em; color: #555555; }
figure.chunk-figure { margin: 1em 0; }
.references .reference { padding-left: 2em; text-indent: -2em; }
hr.appendix { margin-top: 3em; }
";

pub const SLIDES_CSS: &str = "\
body.deck { margin: 0; background: #000000; font-family: var(--font); font-size: var(--text-size, 100%); }
.slide { display: none; box-sizing: border-box; width: 800px; height: 600px; margin: 0 auto; padding: 40px 60px; background: var(--bg); color: var(--fg); opacity: 0; transition: opacity var(--transition) ease-in-out; position: relative; overflow: hidden; }
body.widescreen .slide { width: 1000px; }
.slide.current { display: block; opacity: 1; }
.slide h2 { color: var(--accent); margin-top: 0; }
.slide ul { list-style-type: var(--bullet, disc); }
.title-slide { display: none; }
.title-slide.current { display: flex; flex-direction: column; justify-content: center; }
.title-slide .logo { max-width: 120px; margin-top: 2em; }
.slide-footer { position: absolute; left: 20px; bottom: 20px; }
.slide-footer img { max-height: 40px; }
.slide.flexbox.current { display: flex; flex-direction: column; }
.slide.vcenter { justify-content: center; }
.slide.flexbox.vcenter { align-items: center; text-align: center; }
.slide.smaller { font-size: 80%; }
.red2 { color: #c0392b; }
.red { color: #e74c3c; }
.blue { color: #2a6099; }
.green { color: #27ae60; }
pre { background: var(--code-bg); padding: 0.5em; overflow-x: auto; }
";

pub const SLIDES_JS: &str = "\
(function () {
  var slides = document.querySelectorAll('section.slide');
  var current = 0;
  function show(i) {
    if (i < 0 || i >= slides.length) { return; }
    slides[current].classList.remove('current');
    current = i;
    slides[current].classList.add('current');
  }
  document.addEventListener('keydown', function (e) {
    if (e.key === 'ArrowRight' || e.key === 'PageDown' || e.key === ' ') { show(current + 1); }
    if (e.key === 'ArrowLeft' || e.key === 'PageUp') { show(current - 1); }
    if (e.key === 'Home') { show(0); }
    if (e.key === 'End') { show(slides.length - 1); }
  });
  if (slides.length > 0) { slides[0].classList.add('current'); }
})();
";
