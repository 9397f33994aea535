//! ASCII OBJ meshes and CSV tables.

use std::io::Write;

use crate::error::Result;
use crate::scalar::Real;

/// Triangle mesh; faces index `vertices` from 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh<T> {
    pub vertices: Vec<Vec<T>>,
    pub faces: Vec<[usize; 3]>,
}

impl<T: Real> Mesh<T> {
    /// Unit sphere with `n_lat` latitude bands and `n_lon` longitude
    /// segments: two poles plus `n_lat - 1` rings.
    pub fn uv_sphere(n_lat: usize, n_lon: usize) -> Self {
        let n_lat = n_lat.max(2);
        let n_lon = n_lon.max(3);
        let mut vertices = vec![vec![T::zero(), T::zero(), T::one()]];
        for i in 1..n_lat {
            let th = T::PI() * T::from_usize_lossy(i) / T::from_usize_lossy(n_lat);
            for j in 0..n_lon {
                let ph = T::two_pi() * T::from_usize_lossy(j) / T::from_usize_lossy(n_lon);
                vertices.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
            }
        }
        vertices.push(vec![T::zero(), T::zero(), -T::one()]);
        let south = vertices.len() - 1;
        let ring = |i: usize, j: usize| 1 + (i - 1) * n_lon + j % n_lon;
        let mut faces = Vec::new();
        for j in 0..n_lon {
            faces.push([0, ring(1, j), ring(1, j + 1)]);
        }
        for i in 1..n_lat - 1 {
            for j in 0..n_lon {
                let (a, b) = (ring(i, j), ring(i, j + 1));
                let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
                faces.push([a, c, d]);
                faces.push([a, d, b]);
            }
        }
        for j in 0..n_lon {
            faces.push([south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)]);
        }
        Self { vertices, faces }
    }

    /// Same connectivity, vertices moved by `f`.
    pub fn map(&self, f: impl Fn(&[T]) -> Vec<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| f(v)).collect(),
            faces: self.faces.clone(),
        }
    }

    /// `v x y z` and 1-indexed `f i j k` records.
    pub fn write_obj<W: Write>(&self, mut w: W) -> Result<()> {
        // Adding zero turns -0 into 0.
        let c = |v: T| v.to_f64_lossy() + 0.0;
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", c(v[0]), c(v[1]), c(v[2]))?;
        }
        for f in &self.faces {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    }
}

/// Header plus comma-separated rows, `\n` line endings.
pub fn write_csv<W: Write>(mut w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_counts_and_indexing() {
        let m = Mesh::<f64>::uv_sphere(4, 6);
        assert_eq!(m.vertices.len(), 2 + 3 * 6);
        assert_eq!(m.faces.len(), 2 * 6 + 2 * 2 * 6);
        let mut buf = Vec::new();
        m.write_obj(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let max_index = s
            .lines()
            .filter(|l| l.starts_with("f "))
            .flat_map(|l| {
                l[2..]
                    .split(' ')
                    .map(|t| t.parse::<usize>().unwrap())
                    .collect::<Vec<_>>()
            })
            .max()
            .unwrap();
        assert_eq!(max_index, m.vertices.len());
        assert!(!s.contains('\r'));
    }
}
