//! Line-oriented text format for semantic maps.
//!
//! ```text
//! SEMMAP 1
//! BOUNDS xmin ymin xmax ymax
//! CONCEPTS k
//! id name vertical(0|1)        (k lines; names may contain spaces)
//! SEG concept_id n x1 y1 ... xn yn
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write;

use super::{validate_concepts, validate_segment, Bounds, ConceptLabel, SemanticMap, Segment};
use crate::error::{Error, Result};
use crate::geometry::Point;

pub(crate) struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
        }
    }
}

impl<'a> Iterator for Lines<'a> {
    type Item = (usize, Vec<&'a str>);

    fn next(&mut self) -> Option<Self::Item> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Some((i + 1, line.split_whitespace().collect()));
        }
        None
    }
}

pub(crate) fn num<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("cannot parse {what} from `{tok}`")))
}

pub(crate) fn expect_header(lines: &mut Lines<'_>, magic: &str) -> Result<()> {
    match lines.next() {
        Some((_, toks)) if toks == [magic, "1"] => Ok(()),
        Some((line, toks)) => Err(Error::parse(
            line,
            format!("expected `{magic} 1`, found `{}`", toks.join(" ")),
        )),
        None => Err(Error::parse(1, format!("empty input, expected `{magic} 1`"))),
    }
}

/// Parses a `SEG concept n x1 y1 ...` record.
pub(crate) fn parse_seg(line: usize, toks: &[&str]) -> Result<Segment> {
    if toks.len() < 3 {
        return Err(Error::parse(line, "SEG needs a concept id and vertex count"));
    }
    let concept: usize = num(line, toks[1], "concept id")?;
    let n: usize = num(line, toks[2], "vertex count")?;
    let coords = &toks[3..];
    if coords.len() != 2 * n {
        return Err(Error::parse(
            line,
            format!("SEG declares {n} vertices but carries {} coordinates", coords.len()),
        ));
    }
    let mut polygon = Vec::with_capacity(n);
    for xy in coords.chunks(2) {
        let x: f64 = num(line, xy[0], "x coordinate")?;
        let y: f64 = num(line, xy[1], "y coordinate")?;
        polygon.push(Point::new(x, y));
    }
    Ok(Segment::new(concept, polygon))
}

pub(crate) fn write_seg(out: &mut String, seg: &Segment) {
    write!(out, "SEG {} {}", seg.concept, seg.polygon.len()).unwrap();
    for p in &seg.polygon {
        write!(out, " {} {}", p.x, p.y).unwrap();
    }
    out.push('\n');
}

fn parse_concept(line: usize, toks: &[&str]) -> Result<ConceptLabel> {
    if toks.len() < 3 {
        return Err(Error::parse(line, "concept line needs `id name vertical`"));
    }
    let id: usize = num(line, toks[0], "concept id")?;
    let vertical = match *toks.last().unwrap() {
        "0" => false,
        "1" => true,
        other => return Err(Error::parse(line, format!("vertical flag must be 0 or 1, got `{other}`"))),
    };
    let name = toks[1..toks.len() - 1].join(" ");
    Ok(ConceptLabel::new(id, name, vertical))
}

pub fn parse_map(text: &str) -> Result<SemanticMap> {
    let mut lines = Lines::new(text);
    expect_header(&mut lines, "SEMMAP")?;

    let bounds = match lines.next() {
        Some((line, toks)) if toks.first() == Some(&"BOUNDS") => {
            if toks.len() != 5 {
                return Err(Error::parse(line, "BOUNDS needs xmin ymin xmax ymax"));
            }
            let v: Vec<f64> = toks[1..]
                .iter()
                .map(|t| num(line, t, "bound"))
                .collect::<Result<_>>()?;
            Bounds::new(v[0], v[1], v[2], v[3])
        }
        Some((line, _)) => return Err(Error::parse(line, "expected BOUNDS line")),
        None => return Err(Error::parse(2, "missing BOUNDS line")),
    };

    let k: usize = match lines.next() {
        Some((line, toks)) if toks.first() == Some(&"CONCEPTS") && toks.len() == 2 => {
            num(line, toks[1], "concept count")?
        }
        Some((line, _)) => return Err(Error::parse(line, "expected `CONCEPTS k`")),
        None => return Err(Error::parse(3, "missing CONCEPTS line")),
    };
    let mut concepts = Vec::with_capacity(k);
    for _ in 0..k {
        let (line, toks) = lines
            .next()
            .ok_or_else(|| Error::parse(0, format!("expected {k} concept lines")))?;
        concepts.push(parse_concept(line, &toks)?);
    }
    validate_concepts(&concepts)?;
    if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
        return Err(Error::Validation("bounds must have positive extent".into()));
    }

    let mut segments = Vec::new();
    for (line, toks) in lines {
        if toks[0] != "SEG" {
            return Err(Error::parse(line, format!("unknown record `{}`", toks[0])));
        }
        let seg = parse_seg(line, &toks)?;
        validate_segment(segments.len(), &seg, concepts.len())
            .map_err(|e| Error::Validation(format!("line {line}: {e}")))?;
        if let Some(p) = seg.polygon.iter().find(|p| !bounds.contains(p)) {
            return Err(Error::Validation(format!(
                "line {line}: vertex ({}, {}) lies outside the declared bounds",
                p.x, p.y
            )));
        }
        segments.push(seg);
    }
    Ok(SemanticMap {
        concepts,
        segments,
        bounds,
    })
}

pub fn write_map(map: &SemanticMap) -> String {
    let mut out = String::from("SEMMAP 1\n");
    let b = &map.bounds;
    writeln!(out, "BOUNDS {} {} {} {}", b.min.x, b.min.y, b.max.x, b.max.y).unwrap();
    writeln!(out, "CONCEPTS {}", map.concepts.len()).unwrap();
    for c in &map.concepts {
        writeln!(out, "{} {} {}", c.id, c.name, u8::from(c.vertical)).unwrap();
    }
    for seg in &map.segments {
        write_seg(&mut out, seg);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "SEMMAP 1\nBOUNDS 0 0 90 90\nCONCEPTS 7\n0 Road 0\n1 Tree 0\n2 Building 1\n3 Water 0\n4 Lamp Post 1\n5 Traffic Signal 1\n6 Traffic Sign 1\n";

    #[test]
    fn header_only() {
        let map = parse_map(HEADER).unwrap();
        assert_eq!(map.concepts.len(), 7);
        assert!(map.segments.is_empty());
        assert_eq!(map.bounds, Bounds::new(0.0, 0.0, 90.0, 90.0));
        assert_eq!(map.concepts[4].name, "Lamp Post");
        assert!(map.concepts[4].vertical);
    }

    #[test]
    fn unit_square_road() {
        let text = format!("{HEADER}SEG 0 4 0 0 1 0 1 1 0 1\n");
        let map = parse_map(&text).unwrap();
        assert_eq!(map.segments.len(), 1);
        assert_eq!(map.segments[0].area(), 1.0);
        assert_eq!(parse_map(&write_map(&map)).unwrap(), map);
    }

    #[test]
    fn vertex_outside_bounds() {
        let text = format!("{HEADER}SEG 0 3 0 0 100 0 0 1\n");
        assert!(matches!(parse_map(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = format!("{HEADER}SEG 0 3 0 0 1 zero 0 1\n");
        match parse_map(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 11),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_vertices() {
        let text = format!("{HEADER}SEG 0 2 0 0 1 1\n");
        assert!(matches!(parse_map(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn undeclared_concept() {
        let text = format!("{HEADER}SEG 7 3 0 0 1 0 0 1\n");
        assert!(matches!(parse_map(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(parse_map("SEMMAP 2\n"), Err(Error::Parse { line: 1, .. })));
    }
}
