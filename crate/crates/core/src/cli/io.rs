//! File formats used by the command-line front end.
//!
//! Categories are 1-based on every external surface. A category token is
//! either a generator label (exact match) or a 1-based index.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::generator::{GeneratorMatrix, GeneratorSpec};
use crate::moments::MomentQuery;
use crate::posterior::{posterior_mean_pmf, posterior_mean_pmf_given_t1, CountVector};

/// Reads and builds a JSON generator spec.
pub fn read_generator(path: &Path) -> Result<GeneratorMatrix> {
    let text = fs::read_to_string(path)?;
    GeneratorSpec::from_json(&text)?.build()
}

/// Resolves a category token to a 0-based index.
pub fn parse_category(g: &GeneratorMatrix, token: &str) -> Result<usize> {
    let token = token.trim();
    if let Some(labels) = g.labels() {
        if let Some(i) = labels.iter().position(|l| l == token) {
            return Ok(i);
        }
    }
    match token.parse::<usize>() {
        Ok(i) if (1..=g.dim()).contains(&i) => Ok(i - 1),
        Ok(i) => Err(Error::InvalidArgument(format!(
            "category {i} is outside 1..={}",
            g.dim()
        ))),
        Err(_) => Err(Error::InvalidArgument(format!("unknown category '{token}'"))),
    }
}

/// Parses `"3+4+5:2,7:1"`: comma-separated `set:exponent` terms whose sets
/// are `+`-joined category tokens.
pub fn parse_query(g: &GeneratorMatrix, text: &str) -> Result<MomentQuery> {
    let mut sets = Vec::new();
    let mut exponents = Vec::new();
    for term in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (set, exp) = term
            .rsplit_once(':')
            .ok_or_else(|| Error::Parse(format!("query term '{term}' is missing ':exponent'")))?;
        let exp: u32 = exp
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad exponent in query term '{term}'")))?;
        let members = set
            .split('+')
            .map(|c| parse_category(g, c))
            .collect::<Result<Vec<_>>>()?;
        sets.push(members);
        exponents.push(exp);
    }
    if sets.is_empty() {
        return Err(Error::Parse("empty query".into()));
    }
    MomentQuery::new(g.dim(), sets, exponents)
}

/// Parses a counts CSV with header `category,count`. Missing categories
/// count zero; repeated rows accumulate.
pub fn parse_counts<R: Read>(g: &GeneratorMatrix, reader: R) -> Result<CountVector> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != 2 || &header[0] != "category" || &header[1] != "count" {
        return Err(Error::Parse(format!(
            "counts header must be 'category,count', got '{}'",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut counts = vec![0u32; g.dim()];
    for record in rdr.records() {
        let record = record?;
        let x = parse_category(g, &record[0])?;
        let c: u32 = record[1]
            .parse()
            .map_err(|_| Error::Parse(format!("count '{}' is not a nonnegative integer", &record[1])))?;
        counts[x] = counts[x]
            .checked_add(c)
            .ok_or_else(|| Error::InvalidArgument("count total overflows".into()))?;
    }
    Ok(CountVector::new(counts))
}

pub fn read_counts(g: &GeneratorMatrix, path: &Path) -> Result<CountVector> {
    parse_counts(g, fs::File::open(path)?)
}

/// One row of smoothing output.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothRow {
    pub category: String,
    pub prior_mean: f64,
    pub empirical: f64,
    pub posterior_mean: f64,
}

/// Prior mean, empirical pmf and posterior mean per category. With
/// `given_t1`, both prior and posterior condition on the first atom.
pub fn smoothing_table(g: &GeneratorMatrix, counts: &CountVector, given_t1: Option<usize>) -> Result<Vec<SmoothRow>> {
    if counts.dim() != g.dim() {
        return Err(Error::Dimension(format!(
            "{} counts for {} categories",
            counts.dim(),
            g.dim()
        )));
    }
    let (prior, posterior) = match given_t1 {
        None => (g.mu().clone(), posterior_mean_pmf(g, counts)?),
        Some(x) => (
            posterior_mean_pmf_given_t1(g, &CountVector::zeros(g.dim()), x)?,
            posterior_mean_pmf_given_t1(g, counts, x)?,
        ),
    };
    let empirical = counts.empirical();
    Ok((0..g.dim())
        .map(|x| SmoothRow {
            category: g.category_name(x),
            prior_mean: prior[x],
            empirical: empirical[x],
            posterior_mean: posterior[x],
        })
        .collect())
}

pub fn write_smooth_csv<W: Write>(rows: &[SmoothRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["category", "prior_mean", "empirical", "posterior_mean"])?;
    for r in rows {
        w.write_record([
            r.category.clone(),
            r.prior_mean.to_string(),
            r.empirical.to_string(),
            r.posterior_mean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Self-contained SVG bar chart of `bars`, with `overlay` drawn as dots.
pub fn bar_chart_svg(title: &str, bars: &[f64], overlay: Option<&[f64]>) -> String {
    const W: f64 = 640.0;
    const H: f64 = 320.0;
    const M: f64 = 32.0;
    let top = bars
        .iter()
        .chain(overlay.unwrap_or(&[]))
        .fold(0.0f64, |a, &b| a.max(b))
        .max(f64::MIN_POSITIVE);
    let n = bars.len().max(1) as f64;
    let slot = (W - 2.0 * M) / n;
    let y = |v: f64| H - M - v / top * (H - 2.0 * M);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        xml_escape(title)
    ));
    s.push_str(&format!(
        "<line x1=\"{M}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        H - M,
        W - M
    ));
    for (i, &v) in bars.iter().enumerate() {
        let x = M + i as f64 * slot;
        s.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"steelblue\"><title>{}: {v}</title></rect>\n",
            x + 0.1 * slot,
            y(v),
            0.8 * slot,
            H - M - y(v),
            i + 1
        ));
    }
    if let Some(dots) = overlay {
        for (i, &v) in dots.iter().enumerate() {
            s.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"firebrick\"/>\n",
                M + (i as f64 + 0.5) * slot,
                y(v)
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::tridiagonal;

    #[test]
    fn query_syntax() {
        let g = tridiagonal(8, 1.0).unwrap();
        let q = parse_query(&g, "3+4+5:2, 7:1").unwrap();
        assert_eq!(q.sets(), &[vec![2, 3, 4], vec![6]]);
        assert_eq!(q.exponents(), &[2, 1]);
        assert!(parse_query(&g, "9:1").is_err());
        assert!(parse_query(&g, "1:x").is_err());
        assert!(matches!(
            parse_query(&g, "1+2:1,2:1"),
            Err(Error::OverlappingSets { .. })
        ));
    }

    #[test]
    fn labels_resolve_before_indices() {
        let g = tridiagonal(3, 1.0)
            .unwrap()
            .with_labels(vec!["a".into(), "b".into(), "3".into()])
            .unwrap();
        assert_eq!(parse_category(&g, "b").unwrap(), 1);
        assert_eq!(parse_category(&g, "3").unwrap(), 2);
        assert_eq!(parse_category(&g, "1").unwrap(), 0);
        assert!(parse_category(&g, "c").is_err());
    }

    #[test]
    fn counts_csv() {
        let g = tridiagonal(4, 1.0).unwrap();
        let c = parse_counts(&g, "category,count\n2,3\n4,1\n2,1\n".as_bytes()).unwrap();
        assert_eq!(c.as_slice(), &[0, 4, 0, 1]);
        assert!(parse_counts(&g, "cat,count\n1,1\n".as_bytes()).is_err());
        assert!(parse_counts(&g, "category,count\n5,1\n".as_bytes()).is_err());
        assert!(parse_counts(&g, "category,count\n1,-1\n".as_bytes()).is_err());
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let s = bar_chart_svg("a < b", &[0.2, 0.8], Some(&[0.5, 0.5]));
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<rect").count(), 2);
        assert!(s.contains("a &lt; b"));
    }
}
