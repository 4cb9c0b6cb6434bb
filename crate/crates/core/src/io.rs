//! Point-cloud readers and writers for XYZ, PLY (ascii and binary little
//! endian) and OFF, plus the colored neighbor-highlight export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Point3;

use crate::error::{Error, Location, Result};
use crate::geometry::{PointCloud, PointId};
use crate::query::QueryResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Xyz,
    PlyAscii,
    PlyBinaryLe,
    Off,
}

/// A parsed file. `colors` is filled when a PLY vertex carries
/// `red`/`green`/`blue` properties.
#[derive(Debug, Clone)]
pub struct CloudFile {
    pub path: PathBuf,
    pub format: Format,
    pub cloud: PointCloud,
    pub colors: Option<Vec<[u8; 3]>>,
}

pub fn load_cloud(path: impl AsRef<Path>, format: Option<Format>) -> Result<PointCloud> {
    read_cloud_file(path, format).map(|f| f.cloud)
}

/// Reads and parses `path`. With `format = None` the format is taken from
/// the file's magic bytes, falling back to the extension. For PLY the
/// header's `format` line decides the encoding either way.
pub fn read_cloud_file(path: impl AsRef<Path>, format: Option<Format>) -> Result<CloudFile> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Read {
        path: path.to_owned(),
        source,
    })?;
    let format = match format {
        Some(Format::PlyAscii | Format::PlyBinaryLe) | None if has_ply_magic(&bytes) => ply_encoding(path, &bytes)?,
        Some(f) => f,
        None => detect_format(path, &bytes)?,
    };
    let (points, colors) = match format {
        Format::Xyz => (parse_xyz(path, &bytes)?, None),
        Format::Off => (parse_off(path, &bytes)?, None),
        Format::PlyAscii | Format::PlyBinaryLe => parse_ply(path, &bytes)?,
    };
    Ok(CloudFile {
        path: path.to_owned(),
        format,
        cloud: PointCloud::new(points)?,
        colors,
    })
}

/// Format from the leading bytes of a file, or from the extension when no
/// magic is recognized.
pub fn detect_format(path: &Path, head: &[u8]) -> Result<Format> {
    if has_ply_magic(head) {
        return ply_encoding(path, head);
    }
    if head.starts_with(b"OFF") {
        return Ok(Format::Off);
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "xyz" | "txt" | "pts" | "asc" => Ok(Format::Xyz),
        "ply" => Err(parse_err(path, Location::Line(1), "missing 'ply' magic")),
        "off" => Err(parse_err(path, Location::Line(1), "missing 'OFF' header")),
        "" => Err(Error::UnsupportedFormat(format!(
            "{}: no extension and no magic",
            path.display()
        ))),
        other => Err(Error::UnsupportedFormat(format!(".{other}"))),
    }
}

fn has_ply_magic(bytes: &[u8]) -> bool {
    bytes.starts_with(b"ply\n") || bytes.starts_with(b"ply\r\n")
}

fn parse_err(path: &Path, at: Location, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        at,
        message: message.into(),
    }
}

fn utf8<'a>(path: &Path, bytes: &'a [u8]) -> Result<&'a str> {
    std::str::from_utf8(bytes).map_err(|e| {
        let line = 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count();
        parse_err(path, Location::Line(line), "invalid UTF-8")
    })
}

fn coord(path: &Path, at: Location, tok: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(path, at, format!("expected a number, found {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, at, format!("non-finite coordinate {tok:?}")));
    }
    Ok(v)
}

fn parse_xyz(path: &Path, bytes: &[u8]) -> Result<Vec<Point3<f64>>> {
    let text = utf8(path, bytes)?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let at = Location::Line(i + 1);
        let line = line.split('#').next().unwrap_or("");
        let mut toks = line.split_whitespace();
        let Some(first) = toks.next() else { continue };
        let (Some(second), Some(third)) = (toks.next(), toks.next()) else {
            return Err(parse_err(path, at, "expected at least 3 coordinates"));
        };
        points.push(Point3::new(
            coord(path, at, first)?,
            coord(path, at, second)?,
            coord(path, at, third)?,
        ));
    }
    Ok(points)
}

fn parse_off(path: &Path, bytes: &[u8]) -> Result<Vec<Point3<f64>>> {
    let text = utf8(path, bytes)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let Some((n, magic)) = lines.next() else {
        return Err(parse_err(path, Location::Line(1), "missing 'OFF' header"));
    };
    let mut rest = match magic.strip_prefix("OFF") {
        Some(r) if r.is_empty() || r.starts_with(char::is_whitespace) => r.trim().to_owned(),
        _ => return Err(parse_err(path, Location::Line(n), "missing 'OFF' header")),
    };
    let mut counts_line = n;
    if rest.is_empty() {
        let Some((n, l)) = lines.next() else {
            return Err(parse_err(
                path,
                Location::Line(n + 1),
                "missing vertex/face/edge counts",
            ));
        };
        rest = l.to_owned();
        counts_line = n;
    }
    let declared: usize = rest
        .split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(path, Location::Line(counts_line), "bad vertex count"))?;

    let mut points = Vec::with_capacity(declared);
    for (n, line) in lines.take(declared) {
        let at = Location::Line(n);
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(parse_err(path, at, "expected 3 vertex coordinates"));
        }
        points.push(Point3::new(
            coord(path, at, toks[0])?,
            coord(path, at, toks[1])?,
            coord(path, at, toks[2])?,
        ));
    }
    if points.len() != declared {
        return Err(Error::CountMismatch {
            path: path.to_owned(),
            declared,
            found: points.len(),
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum Property {
    Scalar(String, Scalar),
    List(Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct PlyHeader {
    binary: bool,
    elements: Vec<Element>,
    body_start: usize,
    body_line: usize,
}

/// Splits off the next `\n`-terminated line starting at `pos`.
fn next_line(bytes: &[u8], pos: usize) -> Option<(&[u8], usize)> {
    if pos >= bytes.len() {
        return None;
    }
    let end = bytes[pos..]
        .iter()
        .position(|&b| b == b'\n')
        .map_or(bytes.len(), |i| pos + i);
    let mut line = &bytes[pos..end];
    if line.last() == Some(&b'\r') {
        line = &line[..line.len() - 1];
    }
    Some((line, end + 1))
}

fn ply_encoding(path: &Path, bytes: &[u8]) -> Result<Format> {
    let mut pos = 0;
    let mut n = 0;
    while let Some((line, next)) = next_line(bytes, pos) {
        n += 1;
        let line = String::from_utf8_lossy(line);
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("format") => {
                return match toks.next() {
                    Some("ascii") => Ok(Format::PlyAscii),
                    Some("binary_little_endian") => Ok(Format::PlyBinaryLe),
                    Some(other) => Err(Error::UnsupportedFormat(format!("PLY {other}"))),
                    None => Err(parse_err(path, Location::Line(n), "empty format line")),
                };
            }
            Some("end_header") => break,
            _ => {}
        }
        pos = next;
    }
    Err(parse_err(
        path,
        Location::Line(n.max(1)),
        "PLY header has no format line",
    ))
}

fn parse_ply_header(path: &Path, bytes: &[u8]) -> Result<PlyHeader> {
    let mut pos = 0;
    let mut n = 0;
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some((raw, next)) = next_line(bytes, pos) else {
            return Err(parse_err(
                path,
                Location::Line(n.max(1)),
                "PLY header is missing end_header",
            ));
        };
        n += 1;
        pos = next;
        let at = Location::Line(n);
        let line = std::str::from_utf8(raw).map_err(|_| parse_err(path, at, "header is not UTF-8"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["ply"] if n == 1 => {}
            _ if n == 1 => return Err(parse_err(path, at, "missing 'ply' magic")),
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, ..] => return Err(Error::UnsupportedFormat(format!("PLY {other}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| parse_err(path, at, format!("bad element count {count:?}")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", count, item, _name] => {
                let (Some(c), Some(i)) = (Scalar::parse(count), Scalar::parse(item)) else {
                    return Err(parse_err(path, at, "unknown list property type"));
                };
                let Some(el) = elements.last_mut() else {
                    return Err(parse_err(path, at, "property before any element"));
                };
                el.props.push(Property::List(c, i));
            }
            ["property", ty, name] => {
                let ty =
                    Scalar::parse(ty).ok_or_else(|| parse_err(path, at, format!("unknown property type {ty:?}")))?;
                let Some(el) = elements.last_mut() else {
                    return Err(parse_err(path, at, "property before any element"));
                };
                el.props.push(Property::Scalar(name.to_string(), ty));
            }
            ["end_header"] => break,
            _ => return Err(parse_err(path, at, format!("unrecognized header line {line:?}"))),
        }
    }
    let binary = binary.ok_or_else(|| parse_err(path, Location::Line(n), "PLY header has no format line"))?;
    Ok(PlyHeader {
        binary,
        elements,
        body_start: pos,
        body_line: n + 1,
    })
}

/// Positions of `x`, `y`, `z` and the optional color channels within the
/// vertex element's properties.
struct VertexLayout {
    xyz: [usize; 3],
    rgb: Option<[usize; 3]>,
}

fn vertex_layout(path: &Path, el: &Element) -> Result<VertexLayout> {
    let find = |want: &[&str]| {
        el.props
            .iter()
            .position(|p| matches!(p, Property::Scalar(n, _) if want.contains(&n.as_str())))
    };
    let mut xyz = [0; 3];
    for (slot, name) in xyz.iter_mut().zip(["x", "y", "z"]) {
        let i = find(&[name])
            .ok_or_else(|| parse_err(path, Location::Line(1), format!("vertex has no '{name}' property")))?;
        if let Property::Scalar(_, ty) = &el.props[i] {
            if !matches!(ty, Scalar::F32 | Scalar::F64) {
                return Err(Error::UnsupportedFormat(format!("PLY vertex '{name}' of type {ty:?}")));
            }
        }
        *slot = i;
    }
    let rgb = match (find(&["red", "r"]), find(&["green", "g"]), find(&["blue", "b"])) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    Ok(VertexLayout { xyz, rgb })
}

type Parsed = (Vec<Point3<f64>>, Option<Vec<[u8; 3]>>);

fn parse_ply(path: &Path, bytes: &[u8]) -> Result<Parsed> {
    let header = parse_ply_header(path, bytes)?;
    let Some(vi) = header.elements.iter().position(|e| e.name == "vertex") else {
        return Err(parse_err(path, Location::Line(1), "PLY has no vertex element"));
    };
    let layout = vertex_layout(path, &header.elements[vi])?;
    let mut points = Vec::with_capacity(header.elements[vi].count);
    let mut colors = layout.rgb.map(|_| Vec::with_capacity(header.elements[vi].count));
    let mut record = Vec::new();

    let mut accept = |values: &[f64], at: Location| -> Result<()> {
        let p = Point3::new(values[layout.xyz[0]], values[layout.xyz[1]], values[layout.xyz[2]]);
        if !p.iter().all(|v| v.is_finite()) {
            return Err(parse_err(path, at, "non-finite coordinate"));
        }
        points.push(p);
        if let (Some(rgb), Some(out)) = (layout.rgb, colors.as_mut()) {
            out.push(rgb.map(|i| values[i].clamp(0.0, 255.0) as u8));
        }
        Ok(())
    };

    let declared = header.elements[vi].count;
    let short = |found| Error::CountMismatch {
        path: path.to_owned(),
        declared,
        found,
    };

    if header.binary {
        let mut pos = header.body_start;
        for (ei, el) in header.elements.iter().enumerate() {
            for i in 0..el.count {
                let start = pos;
                record.clear();
                for prop in &el.props {
                    let need = |pos: usize, n: usize| {
                        if pos + n > bytes.len() {
                            Err(if ei == vi {
                                short(i)
                            } else {
                                parse_err(path, Location::Offset(pos as u64), "truncated element data")
                            })
                        } else {
                            Ok(())
                        }
                    };
                    match prop {
                        Property::Scalar(_, ty) => {
                            need(pos, ty.size())?;
                            record.push(ty.read_le(&bytes[pos..]));
                            pos += ty.size();
                        }
                        Property::List(cty, ity) => {
                            need(pos, cty.size())?;
                            let len = cty.read_le(&bytes[pos..]);
                            pos += cty.size();
                            if len < 0.0 {
                                return Err(parse_err(path, Location::Offset(start as u64), "negative list length"));
                            }
                            let skip = len as usize * ity.size();
                            need(pos, skip)?;
                            pos += skip;
                            record.push(f64::NAN);
                        }
                    }
                }
                if ei == vi {
                    accept(&record, Location::Offset(start as u64))?;
                }
            }
        }
        if pos != bytes.len() {
            return Err(parse_err(
                path,
                Location::Offset(pos as u64),
                format!("{} trailing bytes after the last element", bytes.len() - pos),
            ));
        }
    } else {
        let text = utf8(path, &bytes[header.body_start..])?;
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (header.body_line + i, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        for (ei, el) in header.elements.iter().enumerate() {
            for i in 0..el.count {
                let Some((n, line)) = lines.next() else {
                    return Err(if ei == vi {
                        short(i)
                    } else {
                        parse_err(
                            path,
                            Location::Line(header.body_line + text.lines().count()),
                            "unexpected end of data",
                        )
                    });
                };
                let at = Location::Line(n);
                let mut toks = line.split_whitespace();
                record.clear();
                for prop in &el.props {
                    let mut next = || toks.next().ok_or_else(|| parse_err(path, at, "too few values on line"));
                    match prop {
                        Property::Scalar(..) => {
                            let t = next()?;
                            let v: f64 = t
                                .parse()
                                .map_err(|_| parse_err(path, at, format!("expected a number, found {t:?}")))?;
                            record.push(v);
                        }
                        Property::List(..) => {
                            let t = next()?;
                            let len: usize = t
                                .parse()
                                .map_err(|_| parse_err(path, at, format!("bad list length {t:?}")))?;
                            for _ in 0..len {
                                next()?;
                            }
                            record.push(f64::NAN);
                        }
                    }
                }
                if toks.next().is_some() {
                    return Err(parse_err(path, at, "too many values on line"));
                }
                if ei == vi {
                    accept(&record, at)?;
                }
            }
        }
        let extra = lines.count();
        if extra > 0 {
            return Err(if vi + 1 == header.elements.len() {
                short(declared + extra)
            } else {
                parse_err(
                    path,
                    Location::Line(header.body_line),
                    "trailing data after the last element",
                )
            });
        }
    }
    Ok((points, colors))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Write {
        path: path.to_owned(),
        source,
    })
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Write {
        path: path.to_owned(),
        source,
    }
}

/// One point per line. Coordinates use the shortest decimal form that
/// parses back to the same `f64`.
pub fn save_xyz(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let res: std::io::Result<()> = (|| {
        for p in cloud.points() {
            writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
        }
        w.flush()
    })();
    res.map_err(write_err(path))
}

/// PLY with `double` coordinates, so either encoding round-trips exactly.
pub fn save_ply(cloud: &PointCloud, path: impl AsRef<Path>, binary: bool) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let res: std::io::Result<()> = (|| {
        let format = if binary { "binary_little_endian" } else { "ascii" };
        write!(
            w,
            "ply\nformat {format} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
            cloud.len()
        )?;
        for p in cloud.points() {
            if binary {
                for v in p.iter() {
                    w.write_all(&v.to_le_bytes())?;
                }
            } else {
                writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
            }
        }
        w.flush()
    })();
    res.map_err(write_err(path))
}

pub const RED: [u8; 3] = [255, 0, 0];
pub const BLUE: [u8; 3] = [0, 0, 255];
pub const GREEN: [u8; 3] = [0, 255, 0];
pub const ORANGE: [u8; 3] = [255, 165, 0];
pub const GRAY: [u8; 3] = [180, 180, 180];

/// The query of a highlight scene: either a cloud point or an arbitrary
/// location, which is appended as an extra vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchPoint {
    Cloud(PointId),
    Free(Point3<f64>),
}

/// Per-vertex colors of a highlight scene.
///
/// The search point is red. The kNN hits other than the search point itself
/// are ranked by distance: ranks 1 to 3 blue, 4 to 6 green, the rest orange.
/// Radius hits not colored otherwise are orange and everything else gray.
pub fn highlight_colors(cloud: &PointCloud, search: SearchPoint, knn: &QueryResult, rn: &QueryResult) -> Vec<[u8; 3]> {
    let mut colors = vec![GRAY; cloud.len()];
    let own = match search {
        SearchPoint::Cloud(id) => Some(id),
        SearchPoint::Free(_) => None,
    };
    for hit in &rn.hits {
        if let Some(c) = colors.get_mut(hit.id as usize) {
            *c = ORANGE;
        }
    }
    let ranked = knn.hits.iter().filter(|h| Some(h.id) != own);
    for (rank, hit) in ranked.enumerate() {
        if let Some(c) = colors.get_mut(hit.id as usize) {
            *c = match rank {
                0..3 => BLUE,
                3..6 => GREEN,
                _ => ORANGE,
            };
        }
    }
    match search {
        SearchPoint::Cloud(id) => {
            if let Some(c) = colors.get_mut(id as usize) {
                *c = RED;
            }
        }
        SearchPoint::Free(_) => colors.push(RED),
    }
    colors
}

/// Writes the cloud as ascii PLY with `uchar` RGB per vertex, colored by
/// [`highlight_colors`].
pub fn export_highlight(
    cloud: &PointCloud,
    search: SearchPoint,
    knn: &QueryResult,
    rn: &QueryResult,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let colors = highlight_colors(cloud, search, knn, rn);
    let mut points: Vec<Point3<f64>> = cloud.points().to_vec();
    if let SearchPoint::Free(q) = search {
        points.push(q);
    }
    let mut w = create(path)?;
    let res: std::io::Result<()> = (|| {
        write!(
            w,
            "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
             property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
            points.len()
        )?;
        for (p, [r, g, b]) in points.iter().zip(&colors) {
            writeln!(w, "{} {} {} {r} {g} {b}", p.x, p.y, p.z)?;
        }
        w.flush()
    })();
    res.map_err(write_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::Hit;

    fn hits(ids: impl IntoIterator<Item = u32>) -> QueryResult {
        QueryResult {
            hits: ids
                .into_iter()
                .enumerate()
                .map(|(i, id)| Hit { id, dist2: i as f64 })
                .collect(),
        }
    }

    fn count(colors: &[[u8; 3]], c: [u8; 3]) -> usize {
        colors.iter().filter(|&&x| x == c).count()
    }

    #[test]
    fn rank_bands() {
        let cloud = PointCloud::from_coords((0..100).map(|i| [i as f64, 0.0, 0.0])).unwrap();
        // q = 0 is its own nearest neighbor and also an r-hit
        let knn = hits(0..20);
        let rn = hits(0..40);
        let colors = highlight_colors(&cloud, SearchPoint::Cloud(0), &knn, &rn);
        assert_eq!(count(&colors, RED), 1);
        assert_eq!(count(&colors, BLUE), 3);
        assert_eq!(count(&colors, GREEN), 3);
        assert_eq!(count(&colors, ORANGE), 33);
        assert_eq!(count(&colors, GRAY), 60);
    }

    #[test]
    fn single_neighbor_and_empty_radius() {
        let cloud = PointCloud::from_coords((0..10).map(|i| [i as f64, 0.0, 0.0])).unwrap();
        let colors = highlight_colors(
            &cloud,
            SearchPoint::Free(Point3::new(0.1, 0.0, 0.0)),
            &hits([0]),
            &hits([]),
        );
        assert_eq!(colors.len(), 11);
        assert_eq!(count(&colors, BLUE), 1);
        assert_eq!(count(&colors, RED), 1);

        let colors = highlight_colors(&cloud, SearchPoint::Cloud(4), &hits([]), &hits([]));
        assert_eq!(count(&colors, RED), 1);
        assert_eq!(count(&colors, GRAY), 9);
    }
}
