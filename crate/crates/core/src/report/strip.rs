use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;

use super::{escape_html, fmt_fixed, html_page};
use crate::imaging;
use crate::model::ChainStatus;
use crate::storage::{BundleImage, ChainBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripFormat {
    Html,
    Md,
}

struct Frame<'a> {
    t: u32,
    image: Option<&'a BundleImage>,
    similarity: Option<f64>,
    /// `(label, value)` printed under the frame.
    gc: Option<(String, f64)>,
}

fn frames(bundle: &ChainBundle) -> Vec<Frame<'_>> {
    let chain = &bundle.chain;
    let image = |t: u32| bundle.images.iter().find(|i| i.t == t);
    let mut out = vec![Frame {
        t: 0,
        image: image(0),
        similarity: None,
        gc: None,
    }];
    let last = chain.iterations.len() as u32;
    for it in &chain.iterations {
        let gc = if it.t == 1 {
            it.similarity.map(|s| ("GC@1".to_string(), s))
        } else if it.t == last && it.t == bundle.iterations {
            chain.gc_at_t.map(|g| (format!("GC@{}", it.t), g))
        } else {
            None
        };
        out.push(Frame {
            t: it.t,
            image: image(it.t),
            similarity: it.similarity,
            gc,
        });
    }
    out
}

fn failure_note(bundle: &ChainBundle) -> Option<String> {
    match &bundle.chain.status {
        ChainStatus::Failed(reason) => Some(format!(
            "Chain failed after t={}: {reason}",
            bundle.chain.iterations.len()
        )),
        _ => None,
    }
}

/// Seed and generated images left to right, s^(t) above each generated
/// image, GC@1 under the first and GC@T under the last. Unfinished chains
/// stop at their last stored iteration; missing files become placeholders.
pub fn render_chain_strip(bundle: &ChainBundle, format: StripFormat) -> String {
    let frames = frames(bundle);
    let title = format!("{} / {}", bundle.run_id, bundle.chain.seed.id);
    match format {
        StripFormat::Html => {
            let mut b = format!("<h2>{}</h2>\n<div class=\"strip\">\n", escape_html(&title));
            for f in &frames {
                b.push_str("<div class=\"frame\">\n");
                match f.similarity {
                    Some(s) => b.push_str(&format!("<div class=\"sim\">s = {}</div>\n", fmt_fixed(s, 3))),
                    None => b.push_str("<div class=\"sim-none\">seed</div>\n"),
                }
                let alt = format!("X^({})", f.t);
                match f.image.and_then(|i| i.bytes.as_ref()) {
                    Some(bytes) => b.push_str(&format!(
                        "<img alt=\"{alt}\" src=\"data:{};base64,{}\">\n",
                        imaging::mime_type(bytes),
                        B64.encode(bytes)
                    )),
                    None => {
                        tracing::warn!(t = f.t, "strip image missing, using placeholder");
                        b.push_str(&format!("<div class=\"missing\">{alt}: image missing</div>\n"));
                    }
                }
                b.push_str(&format!("<div>t = {}</div>\n", f.t));
                if let Some((label, v)) = &f.gc {
                    b.push_str(&format!("<div class=\"gc\">{label} = {}</div>\n", fmt_fixed(*v, 3)));
                }
                b.push_str("</div>\n");
            }
            b.push_str("</div>\n");
            if let Some(note) = failure_note(bundle) {
                b.push_str(&format!("<p class=\"note\">{}</p>\n", escape_html(&note)));
            }
            html_page(&title, &b)
        }
        StripFormat::Md => {
            let n = frames.len();
            let mut s = format!("### {title}\n\n|");
            for f in &frames {
                s.push_str(&format!(" t={} |", f.t));
            }
            s.push_str(&format!("\n|{}\n|", ":---:|".repeat(n)));
            for f in &frames {
                match f.similarity {
                    Some(v) => s.push_str(&format!(" s = {} |", fmt_fixed(v, 3))),
                    None => s.push_str(" seed |"),
                }
            }
            s.push_str("\n|");
            for f in &frames {
                match f.image.filter(|i| i.bytes.is_some()) {
                    Some(i) => s.push_str(&format!(" ![X^({})]({}) |", f.t, i.path)),
                    None => {
                        tracing::warn!(t = f.t, "strip image missing, using placeholder");
                        s.push_str(" (image missing) |");
                    }
                }
            }
            s.push_str("\n|");
            for f in &frames {
                match &f.gc {
                    Some((label, v)) => s.push_str(&format!(" {label} = {} |", fmt_fixed(*v, 3))),
                    None => s.push_str("  |"),
                }
            }
            s.push('\n');
            if let Some(note) = failure_note(bundle) {
                s.push_str(&format!("\n_{note}_\n"));
            }
            s
        }
    }
}
