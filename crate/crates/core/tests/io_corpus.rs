use std::path::PathBuf;

use nalgebra::Point3;
use twolevel_lsh::io::{detect_format, read_cloud_file, save_ply, save_xyz, CloudFile};
use twolevel_lsh::synth::{generate, Family};
use twolevel_lsh::{load_cloud, Error, Format, Location};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn read(name: &str) -> CloudFile {
    read_cloud_file(data(name), None).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn cube() -> Vec<Point3<f64>> {
    let mut v = Vec::new();
    for z in [0.0, 1.0] {
        for y in [0.0, 1.0] {
            for x in [0.0, 1.0] {
                v.push(Point3::new(x, y, z));
            }
        }
    }
    v
}

#[test]
fn well_formed_files() {
    let cases = [
        ("cube.xyz", Format::Xyz),
        ("cube_ascii.ply", Format::PlyAscii),
        ("cube_faces_colors.ply", Format::PlyAscii),
        ("cube_binary_f32.ply", Format::PlyBinaryLe),
        ("cube_binary_f64.ply", Format::PlyBinaryLe),
        ("cube.off", Format::Off),
        ("cube_ply_noext", Format::PlyAscii),
    ];
    for (name, format) in cases {
        let f = read(name);
        assert_eq!(f.format, format, "{name}");
        assert_eq!(f.cloud.points(), cube().as_slice(), "{name}");
    }
    let colors = read("cube_faces_colors.ply").colors.unwrap();
    assert_eq!(colors[0], [255, 0, 0]);
    assert_eq!(colors[7], [255, 210, 0]);
    assert!(read("cube_binary_f32.ply").colors.is_none());
}

#[test]
fn small_files() {
    let two = load_cloud(data("two_points.xyz"), None).unwrap();
    assert_eq!(two.points(), &[Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 2.0, 3.0)]);

    let extra = load_cloud(data("extra_columns.xyz"), None).unwrap();
    assert_eq!(extra.len(), 5);
    assert_eq!(extra[1], Point3::new(1.5, 0.25, 0.0));

    let txt = load_cloud(data("points.txt"), None).unwrap();
    assert_eq!(txt[0], Point3::new(1000.0, -0.25, 7.0));

    let tri = read("inline_counts.off");
    assert_eq!(tri.format, Format::Off);
    assert_eq!(tri.cloud.len(), 3);
}

#[test]
fn malformed_files() {
    let parse_line = |name: &str, line: usize| match load_cloud(data(name), None) {
        Err(Error::Parse { at, .. }) => assert_eq!(at, Location::Line(line), "{name}"),
        other => panic!("{name}: expected a parse error, got {other:?}"),
    };
    parse_line("nan.xyz", 2);
    parse_line("short_line.xyz", 2);
    parse_line("garbage.xyz", 2);
    parse_line("nonfinite.ply", 9);
    parse_line("no_magic.ply", 1);

    let mismatch = |name: &str, declared: usize, found: usize| match load_cloud(data(name), None) {
        Err(Error::CountMismatch {
            declared: d, found: f, ..
        }) => assert_eq!((d, f), (declared, found), "{name}"),
        other => panic!("{name}: expected a count mismatch, got {other:?}"),
    };
    mismatch("count_mismatch.ply", 10, 8);
    mismatch("count_mismatch.off", 5, 2);
    mismatch("truncated_binary.ply", 8, 7);

    for name in ["big_endian.ply", "cloud.las"] {
        assert!(
            matches!(load_cloud(data(name), None), Err(Error::UnsupportedFormat(_))),
            "{name}"
        );
    }
    assert!(matches!(load_cloud(data("missing.xyz"), None), Err(Error::Read { .. })));
}

/// Every corpus file is classified by magic first, then by extension.
#[test]
fn detection_on_corpus() {
    let expected = [
        ("cube.xyz", Some(Format::Xyz)),
        ("two_points.xyz", Some(Format::Xyz)),
        ("points.txt", Some(Format::Xyz)),
        ("cube_ascii.ply", Some(Format::PlyAscii)),
        ("cube_binary_f32.ply", Some(Format::PlyBinaryLe)),
        ("truncated_binary.ply", Some(Format::PlyBinaryLe)),
        ("cube.off", Some(Format::Off)),
        ("count_mismatch.off", Some(Format::Off)),
        ("cube_ply_noext", Some(Format::PlyAscii)),
        ("big_endian.ply", None),
        ("no_magic.ply", None),
        ("cloud.las", None),
    ];
    let corpus = std::fs::read_dir(data("")).unwrap().count();
    assert!(corpus >= 12);
    for (name, format) in expected {
        let bytes = std::fs::read(data(name)).unwrap();
        assert_eq!(detect_format(&data(name), &bytes).ok(), format, "{name}");
    }
}

#[test]
fn save_load_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut cloud = generate(Family::Ellipsoid, 1_000, 4).unwrap();
    // awkward values: subnormal, negative zero, large magnitude
    let mut pts = cloud.points().to_vec();
    pts[0] = Point3::new(f64::MIN_POSITIVE / 4.0, -0.0, 1e300);
    pts[1] = Point3::new(0.1 + 0.2, -1.0 / 3.0, std::f64::consts::PI);
    cloud = twolevel_lsh::PointCloud::new(pts).unwrap();

    let bits = |c: &twolevel_lsh::PointCloud| -> Vec<[u64; 3]> {
        c.points()
            .iter()
            .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
            .collect()
    };

    let bin = dir.path().join("c.ply");
    save_ply(&cloud, &bin, true).unwrap();
    assert_eq!(bits(&load_cloud(&bin, None).unwrap()), bits(&cloud));

    let ascii = dir.path().join("a.ply");
    save_ply(&cloud, &ascii, false).unwrap();
    assert_eq!(bits(&load_cloud(&ascii, Some(Format::PlyAscii)).unwrap()), bits(&cloud));

    let xyz = dir.path().join("c.xyz");
    save_xyz(&cloud, &xyz).unwrap();
    assert_eq!(bits(&load_cloud(&xyz, None).unwrap()), bits(&cloud));
}
