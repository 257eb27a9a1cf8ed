//! Reader for the `v` / `vt` / `f` subset of the Wavefront OBJ text format.

use crate::error::{Error, Result};
use crate::math::Vec3;

use super::mesh::{MeshAsset, Triangle};

/// Parses mesh text. Polygons with more than three corners are fan
/// triangulated from their first corner. Statements other than `v`, `vt` and
/// `f` (normals, groups, materials) are ignored, as are degenerate triangles.
pub fn load_mesh(text: &str) -> Result<MeshAsset> {
    let mut mesh = MeshAsset::default();
    let mut faces: Vec<(usize, Vec<(i64, i64)>)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        let parse_f = |t: &str| {
            t.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid number '{t}'"),
            })
        };
        match keyword {
            "v" => {
                let c: Vec<f64> = tokens.map(parse_f).collect::<Result<_>>()?;
                if c.len() < 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "vertex needs three coordinates".into(),
                    });
                }
                mesh.vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            "vt" => {
                let c: Vec<f64> = tokens.map(parse_f).collect::<Result<_>>()?;
                if c.len() < 2 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "texture coordinate needs two components".into(),
                    });
                }
                mesh.uvs.push([c[0], c[1]]);
            }
            "f" => {
                let corners = tokens.map(|t| parse_corner(t, line_no)).collect::<Result<Vec<_>>>()?;
                if corners.len() < 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "face needs at least three corners".into(),
                    });
                }
                faces.push((line_no, corners));
            }
            _ => {}
        }
    }

    // Relative (negative) indices refer to the elements defined so far, but
    // resolving against the final counts is what every mainstream exporter
    // relies on when faces come last.
    let nv = mesh.vertices.len() as i64;
    let nt = mesh.uvs.len() as i64;
    for (line, corners) in faces {
        let resolved = corners
            .iter()
            .map(|&(v, t)| Ok((resolve(v, nv, line)?, resolve(t, nt, line)?)))
            .collect::<Result<Vec<_>>>()?;
        for k in 1..resolved.len() - 1 {
            let tri = Triangle {
                v: [resolved[0].0, resolved[k].0, resolved[k + 1].0],
                uv: [resolved[0].1, resolved[k].1, resolved[k + 1].1],
            };
            mesh.triangles.push(tri);
            if !(mesh.triangle_area(mesh.triangles.len() - 1) > 1e-12) {
                mesh.triangles.pop();
            }
        }
    }
    mesh.validate()?;
    Ok(mesh)
}

fn parse_corner(token: &str, line: usize) -> Result<(i64, i64)> {
    let mut parts = token.split('/');
    let parse_i = |s: &str| {
        s.parse::<i64>().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid face index '{s}'"),
        })
    };
    let v = parse_i(parts.next().unwrap_or(""))?;
    match parts.next() {
        Some(t) if !t.is_empty() => Ok((v, parse_i(t)?)),
        _ => Err(Error::MissingUv { line }),
    }
}

fn resolve(index: i64, count: i64, line: usize) -> Result<u32> {
    let zero_based = match index {
        i if i > 0 => i - 1,
        i if i < 0 => count + i,
        _ => -1,
    };
    if zero_based < 0 || zero_based >= count {
        return Err(Error::BadIndex { line, index });
    }
    Ok(zero_based as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n";

    #[test]
    fn minimal_triangle() {
        let m = load_mesh(TRI).unwrap();
        assert_eq!(m.triangles.len(), 1);
        assert_eq!(m.triangles[0].v, [0, 1, 2]);
    }

    #[test]
    fn quad_fans_from_first_corner() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\nf 1/1 2/2 3/3 4/4\n";
        let m = load_mesh(text).unwrap();
        assert_eq!(m.triangles.len(), 2);
        assert_eq!(m.triangles[0].v, [0, 1, 2]);
        assert_eq!(m.triangles[1].v, [0, 2, 3]);
        assert_eq!(m.triangles[1].uv, [0, 2, 3]);
    }

    #[test]
    fn missing_uv_is_an_error() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        assert!(matches!(load_mesh(text), Err(Error::MissingUv { line: 4 })));
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1//1 2//1 3//1\n";
        assert!(matches!(load_mesh(text), Err(Error::MissingUv { line: 5 })));
    }

    #[test]
    fn out_of_range_index() {
        let text = TRI.replace("f 1/1 2/2 3/3", "f 1/1 2/2 9/3");
        assert!(matches!(load_mesh(&text), Err(Error::BadIndex { line: 7, index: 9 })));
    }

    #[test]
    fn parse_error_reports_line() {
        let text = TRI.replace("v 1 0 0", "v 1 zero 0");
        assert!(matches!(load_mesh(&text), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn negative_indices_and_extras() {
        let text = "# comment\no thing\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\nvt 1 0\nvt 0 1\ns off\nf -3/-3/1 -2/-2/1 -1/-1/1\n";
        let m = load_mesh(text).unwrap();
        assert_eq!(m.triangles[0].v, [0, 1, 2]);
    }

    #[test]
    fn bundled_meshes_load() {
        for text in crate::config::BUILTIN_MESHES.iter().map(|(_, t)| t) {
            let m = load_mesh(text).unwrap();
            m.normalized().validate().unwrap();
        }
    }
}
