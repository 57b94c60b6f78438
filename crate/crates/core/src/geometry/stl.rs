//! STL input (ASCII and binary) with vertex welding, and ASCII output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::surface::TriSurface;
use crate::error::{Error, Result};
use crate::Vec3;

fn key(v: &Vec3) -> [u64; 3] {
    // +0.0 and -0.0 weld together.
    [v.x + 0.0, v.y + 0.0, v.z + 0.0].map(f64::to_bits)
}

fn weld(corners: Vec<[Vec3; 3]>) -> Result<TriSurface> {
    let mut index: HashMap<[u64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(corners.len());
    for tri in corners {
        let ids = tri.map(|v| {
            *index.entry(key(&v)).or_insert_with(|| {
                vertices.push(v);
                vertices.len() - 1
            })
        });
        triangles.push(ids);
    }
    TriSurface::new(vertices, triangles)
}

pub fn parse_stl_ascii(text: &str) -> Result<TriSurface> {
    let mut corners = Vec::new();
    let mut current: Vec<Vec3> = Vec::with_capacity(3);
    let mut saw_solid = false;
    for (i, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("solid") => saw_solid = true,
            Some("vertex") => {
                let xs: Vec<f64> = tok
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| Error::Parse {
                            line: i + 1,
                            message: format!("bad coordinate '{t}'"),
                        })
                    })
                    .collect::<Result<_>>()?;
                if xs.len() != 3 {
                    return Err(Error::Parse { line: i + 1, message: "vertex needs 3 coordinates".into() });
                }
                current.push(Vec3::new(xs[0], xs[1], xs[2]));
            }
            Some("endloop") => {
                if current.len() != 3 {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("facet has {} vertices, expected 3", current.len()),
                    });
                }
                corners.push([current[0], current[1], current[2]]);
                current.clear();
            }
            _ => {}
        }
    }
    if !saw_solid {
        return Err(Error::Parse { line: 1, message: "missing 'solid' header".into() });
    }
    weld(corners)
}

pub fn parse_stl_binary(bytes: &[u8]) -> Result<TriSurface> {
    if bytes.len() < 84 {
        return Err(Error::Parse { line: 0, message: "binary STL shorter than its header".into() });
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    if bytes.len() < 84 + 50 * n {
        return Err(Error::Parse { line: 0, message: format!("binary STL truncated: {n} facets declared") });
    }
    let f = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as f64;
    let corners = (0..n)
        .map(|t| {
            let base = 84 + 50 * t + 12;
            [0, 1, 2].map(|k| {
                let o = base + 12 * k;
                Vec3::new(f(o), f(o + 4), f(o + 8))
            })
        })
        .collect();
    weld(corners)
}

pub fn parse_stl(bytes: &[u8]) -> Result<TriSurface> {
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        if bytes.len() == 84 + 50 * n {
            return parse_stl_binary(bytes);
        }
    }
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::Parse { line: 0, message: "STL is neither binary nor UTF-8 text".into() })?;
    parse_stl_ascii(text)
}

pub fn read_stl(path: &Path) -> Result<TriSurface> {
    parse_stl(&std::fs::read(path)?)
}

pub fn write_stl_ascii(surface: &TriSurface, name: &str) -> String {
    let mut s = String::new();
    writeln!(s, "solid {name}").unwrap();
    for (t, tri) in surface.triangles().iter().enumerate() {
        let n = surface.normals()[t];
        writeln!(s, "  facet normal {} {} {}", n.x, n.y, n.z).unwrap();
        s.push_str("    outer loop\n");
        for &i in tri {
            let v = surface.vertices()[i];
            writeln!(s, "      vertex {} {} {}", v.x, v.y, v.z).unwrap();
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    writeln!(s, "endsolid {name}").unwrap();
    s
}
