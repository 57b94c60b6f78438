//! Mesh text format (`ibflow-mesh v1`) and legacy VTK export.
//!
//! ```text
//! ibflow-mesh v1
//! vertices <n>
//! <x> <y> <z>                         (n lines)
//! faces <m>
//! <owner> <neighbour|-1> <k> <v0> ... (m lines)
//! patches <p>
//! <name> <wall|inflow|outflow|symmetry> <k> <f0> ...
//! periodic <q>
//! <face> <sx> <sy> <sz>
//! end
//! ```
//! Floats are written in shortest round-trip form, so write/read is exact.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{Face, Mesh, Patch, PatchKind};
use crate::error::{Error, Result};
use crate::Vec3;

pub const MESH_HEADER: &str = "ibflow-mesh v1";

pub fn write_mesh_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    writeln!(s, "{MESH_HEADER}").unwrap();
    writeln!(s, "vertices {}", mesh.vertices().len()).unwrap();
    for v in mesh.vertices() {
        writeln!(s, "{} {} {}", v.x, v.y, v.z).unwrap();
    }
    writeln!(s, "faces {}", mesh.n_faces()).unwrap();
    for f in mesh.faces() {
        let nb = f.neighbour.map_or(-1, |n| n as i64);
        write!(s, "{} {} {}", f.owner, nb, f.vertices.len()).unwrap();
        for v in &f.vertices {
            write!(s, " {v}").unwrap();
        }
        s.push('\n');
    }
    writeln!(s, "patches {}", mesh.patches().len()).unwrap();
    for p in mesh.patches() {
        write!(s, "{} {} {}", p.name, p.kind.as_str(), p.faces.len()).unwrap();
        for f in &p.faces {
            write!(s, " {f}").unwrap();
        }
        s.push('\n');
    }
    let per = mesh.periodic_faces();
    writeln!(s, "periodic {}", per.len()).unwrap();
    for (f, t) in per {
        writeln!(s, "{} {} {} {}", f, t.x, t.y, t.z).unwrap();
    }
    s.push_str("end\n");
    s
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_tokens(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, l) in self.it.by_ref() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            self.line = i + 1;
            return Ok((i + 1, l.split_whitespace().collect()));
        }
        Err(Error::Parse {
            line: self.line + 1,
            message: "unexpected end of file".into(),
        })
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let (line, t) = self.next_tokens()?;
        if t.len() != 2 || t[0] != name {
            return Err(Error::Parse {
                line,
                message: format!("expected '{name} <count>'"),
            });
        }
        parse(line, t[1])
    }
}

fn parse<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse '{tok}'"),
    })
}

pub fn read_mesh_str(text: &str) -> Result<Mesh> {
    let mut lines = Lines {
        it: text.lines().enumerate(),
        line: 0,
    };
    let (line, header) = lines.next_tokens()?;
    if header.join(" ") != MESH_HEADER {
        return Err(Error::Parse {
            line,
            message: format!("expected header '{MESH_HEADER}'"),
        });
    }
    let nv = lines.section("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, t) = lines.next_tokens()?;
        if t.len() != 3 {
            return Err(Error::Parse { line, message: "vertex needs 3 coordinates".into() });
        }
        vertices.push(Vec3::new(parse(line, t[0])?, parse(line, t[1])?, parse(line, t[2])?));
    }
    let nf = lines.section("faces")?;
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, t) = lines.next_tokens()?;
        if t.len() < 3 {
            return Err(Error::Parse { line, message: "face line too short".into() });
        }
        let owner: usize = parse(line, t[0])?;
        let nb: i64 = parse(line, t[1])?;
        let k: usize = parse(line, t[2])?;
        if t.len() != 3 + k {
            return Err(Error::Parse { line, message: format!("face declares {k} vertices") });
        }
        let vs = t[3..].iter().map(|s| parse(line, s)).collect::<Result<Vec<usize>>>()?;
        faces.push(Face {
            vertices: vs,
            owner,
            neighbour: if nb < 0 { None } else { Some(nb as usize) },
        });
    }
    let np = lines.section("patches")?;
    let mut patches = Vec::with_capacity(np);
    for _ in 0..np {
        let (line, t) = lines.next_tokens()?;
        if t.len() < 3 {
            return Err(Error::Parse { line, message: "patch line too short".into() });
        }
        let kind = PatchKind::parse(t[1]).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown patch kind '{}'", t[1]),
        })?;
        let k: usize = parse(line, t[2])?;
        if t.len() != 3 + k {
            return Err(Error::Parse { line, message: format!("patch declares {k} faces") });
        }
        let fs = t[3..].iter().map(|s| parse(line, s)).collect::<Result<Vec<usize>>>()?;
        patches.push(Patch { name: t[0].to_string(), faces: fs, kind });
    }
    let nper = lines.section("periodic")?;
    let mut periodic = Vec::with_capacity(nper);
    for _ in 0..nper {
        let (line, t) = lines.next_tokens()?;
        if t.len() != 4 {
            return Err(Error::Parse { line, message: "periodic entry needs face + shift".into() });
        }
        periodic.push((
            parse(line, t[0])?,
            Vec3::new(parse(line, t[1])?, parse(line, t[2])?, parse(line, t[3])?),
        ));
    }
    let (line, t) = lines.next_tokens()?;
    if t != ["end"] {
        return Err(Error::Parse { line, message: "expected 'end'".into() });
    }
    Mesh::from_topology(vertices, faces, patches, periodic)
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    read_mesh_str(&std::fs::read_to_string(path)?)
}

/// Cell-data array attached to a VTK export.
pub enum CellData<'a> {
    Scalar(&'a str, &'a [f64]),
    Integer(&'a str, &'a [i32]),
    Vector(&'a str, &'a [Vec3]),
}

/// Legacy ASCII VTK unstructured grid with polyhedral cells.
pub fn write_vtk(mesh: &Mesh, data: &[CellData<'_>], w: &mut impl Write) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 4.2")?;
    writeln!(w, "ibflow export")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.vertices().len())?;
    for v in mesh.vertices() {
        writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
    }
    let mut streams = Vec::with_capacity(mesh.n_cells());
    let mut total = 0;
    for c in 0..mesh.n_cells() {
        // Periodic faces seen from the neighbour side have no vertices of
        // their own on this side; they are skipped in the visual export.
        let fs: Vec<usize> = mesh
            .cell_faces(c)
            .iter()
            .copied()
            .filter(|&f| !(mesh.is_periodic_face(f) && mesh.face(f).owner != c))
            .collect();
        let mut s = vec![fs.len()];
        for f in fs {
            let face = mesh.face(f);
            s.push(face.vertices.len());
            if face.owner == c {
                s.extend(face.vertices.iter().copied());
            } else {
                s.extend(face.vertices.iter().rev().copied());
            }
        }
        total += s.len() + 1;
        streams.push(s);
    }
    writeln!(w, "CELLS {} {}", mesh.n_cells(), total)?;
    for s in &streams {
        write!(w, "{}", s.len())?;
        for v in s {
            write!(w, " {v}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.n_cells())?;
    for _ in 0..mesh.n_cells() {
        writeln!(w, "42")?;
    }
    if !data.is_empty() {
        writeln!(w, "CELL_DATA {}", mesh.n_cells())?;
    }
    for d in data {
        match d {
            CellData::Scalar(name, v) => {
                writeln!(w, "SCALARS {name} double 1\nLOOKUP_TABLE default")?;
                for x in v.iter() {
                    writeln!(w, "{x}")?;
                }
            }
            CellData::Integer(name, v) => {
                writeln!(w, "SCALARS {name} int 1\nLOOKUP_TABLE default")?;
                for x in v.iter() {
                    writeln!(w, "{x}")?;
                }
            }
            CellData::Vector(name, v) => {
                writeln!(w, "VECTORS {name} double")?;
                for x in v.iter() {
                    writeln!(w, "{} {} {}", x.x, x.y, x.z)?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_grid, BoxSpec};

    #[test]
    fn mesh_text_round_trip_is_exact() {
        let mut spec = BoxSpec::unit([3, 2, 2]);
        spec.grading = [1.7, 1.0, 0.6];
        spec.periodic = [false, true, false];
        let m = build_structured_grid(&spec).unwrap();
        let text = write_mesh_string(&m);
        let m2 = read_mesh_str(&text).unwrap();
        assert_eq!(write_mesh_string(&m2), text);
        for c in 0..m.n_cells() {
            assert_eq!(m.volume(c).to_bits(), m2.volume(c).to_bits());
        }
    }

    #[test]
    fn bad_header_is_parse_error() {
        assert!(matches!(read_mesh_str("foo\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn vtk_export_lists_every_cell() {
        let m = build_structured_grid(&BoxSpec::unit([2, 1, 1])).unwrap();
        let labels = vec![0i32, 1];
        let mut out = Vec::new();
        write_vtk(&m, &[CellData::Integer("label", &labels)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("CELLS 2 "));
        assert!(text.contains("CELL_TYPES 2"));
        assert!(text.contains("SCALARS label int 1"));
    }
}
