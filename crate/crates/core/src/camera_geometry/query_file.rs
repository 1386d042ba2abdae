//! Query file format.
//!
//! ```text
//! SEMQUERY 1
//! CAMERA f cx cy W H d y_h
//! HOMOGRAPHY h11 h12 h13 h21 h22 h23 h31 h32 h33   (optional)
//! FRAME pixel|ground                              (optional, default pixel)
//! ORIGIN x z                                      (optional image-centre override, ground frame)
//! SEG concept_id n x1 y1 ... xn yn
//! ```
//!
//! In the `ground` frame the segments are already rectified into the
//! camera-centred metric frame (x right, z forward).

use std::fmt::Write;

use nalgebra::Matrix3;

use super::CameraModel;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::map_model::format::{expect_header, num, parse_seg, write_seg, Lines};
use crate::map_model::Segment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueryFrame {
    #[default]
    Pixel,
    Ground,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryFile {
    pub camera: CameraModel,
    pub frame: QueryFrame,
    pub origin: Option<Point>,
    pub segments: Vec<Segment>,
}

pub fn parse_query(text: &str) -> Result<QueryFile> {
    let mut lines = Lines::new(text);
    expect_header(&mut lines, "SEMQUERY")?;
    let camera = match lines.next() {
        Some((line, toks)) if toks.first() == Some(&"CAMERA") => {
            if toks.len() != 8 {
                return Err(Error::parse(line, "CAMERA needs f cx cy W H d y_h"));
            }
            let v: Vec<f64> = toks[1..]
                .iter()
                .map(|t| num(line, t, "camera parameter"))
                .collect::<Result<_>>()?;
            CameraModel::new(v[0], (v[1], v[2]), (v[3], v[4]), v[5], v[6])
                .map_err(|e| Error::Validation(format!("line {line}: {e}")))?
        }
        Some((line, _)) => return Err(Error::parse(line, "expected CAMERA line")),
        None => return Err(Error::parse(2, "missing CAMERA line")),
    };
    let mut query = QueryFile {
        camera,
        frame: QueryFrame::Pixel,
        origin: None,
        segments: Vec::new(),
    };
    for (line, toks) in lines {
        match toks[0] {
            "HOMOGRAPHY" => {
                if toks.len() != 10 {
                    return Err(Error::parse(line, "HOMOGRAPHY needs 9 entries"));
                }
                let v: Vec<f64> = toks[1..]
                    .iter()
                    .map(|t| num(line, t, "homography entry"))
                    .collect::<Result<_>>()?;
                query.camera.homography = Some(Matrix3::from_row_slice(&v));
            }
            "FRAME" => {
                query.frame = match toks.get(1) {
                    Some(&"pixel") => QueryFrame::Pixel,
                    Some(&"ground") => QueryFrame::Ground,
                    _ => return Err(Error::parse(line, "FRAME must be `pixel` or `ground`")),
                }
            }
            "ORIGIN" => {
                if toks.len() != 3 {
                    return Err(Error::parse(line, "ORIGIN needs x z"));
                }
                query.origin = Some(Point::new(num(line, toks[1], "x")?, num(line, toks[2], "z")?));
            }
            "SEG" => {
                let seg = parse_seg(line, &toks)?;
                if seg.polygon.len() < 3 {
                    return Err(Error::Validation(format!("line {line}: polygon needs at least 3 vertices")));
                }
                query.segments.push(seg);
            }
            other => return Err(Error::parse(line, format!("unknown record `{other}`"))),
        }
    }
    Ok(query)
}

pub fn write_query(q: &QueryFile) -> String {
    let c = &q.camera;
    let mut out = String::from("SEMQUERY 1\n");
    writeln!(
        out,
        "CAMERA {} {} {} {} {} {} {}",
        c.focal, c.principal.0, c.principal.1, c.image_size.0, c.image_size.1, c.height, c.horizon_row
    )
    .unwrap();
    if let Some(h) = c.homography {
        out.push_str("HOMOGRAPHY");
        for r in 0..3 {
            for k in 0..3 {
                write!(out, " {}", h[(r, k)]).unwrap();
            }
        }
        out.push('\n');
    }
    if q.frame == QueryFrame::Ground {
        out.push_str("FRAME ground\n");
    }
    if let Some(o) = q.origin {
        writeln!(out, "ORIGIN {} {}", o.x, o.y).unwrap();
    }
    for seg in &q.segments {
        write_seg(&mut out, seg);
    }
    out
}
