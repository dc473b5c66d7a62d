//! Built-in space generators.
//!
//! Each generator emits edge lengths, conductances and vertex measures that
//! are mutually consistent, in the sense that the graph Laplacian of the
//! resulting space is a convergent discretization of the Laplace-Beltrami
//! operator of the underlying smooth (or cone) surface:
//!
//! * `cycle`: circle of radius `r`, spacing `h = 2*pi*r/n`, `w = 1/h`,
//!   `m = h` (the standard second difference divided by `h^2`).
//! * `icosphere`: subdivided icosahedron projected to the sphere, cotangent
//!   conductances and barycentric vertex areas; edge lengths are great-circle
//!   distances.
//! * `flat_torus`: n-by-n periodic grid on the unit square, 5-point stencil.
//! * `cone`: flat cone of a given total angle with unit slant radius, polar
//!   grid, finite-volume conductances; the apex carries its barycentric cell
//!   area.
//! * `cube_boundary`: cell-centered grid on the surface of the unit cube,
//!   folded across the edges.

use crate::error::{Error, Result};
use crate::space::DiscreteMMSpace;
use std::collections::HashMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceKind {
    Cycle { n: usize, radius: f64 },
    Icosphere { subdivisions: u32, radius: f64 },
    FlatTorus { n: usize },
    Cone { total_angle: f64, n_r: usize, n_theta: usize },
    CubeBoundary { n_per_face: usize },
}

impl SpaceKind {
    /// Parse a compact spec like `cycle:64:1.0` or `icosphere:3:1.0`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = |msg: &str| Error::BadParams(format!("{spec}: {msg}"));
        let kind = parts[0];
        match kind {
            "cycle" => {
                if parts.len() != 3 {
                    return Err(bad("expected cycle:n:radius"));
                }
                Ok(SpaceKind::Cycle {
                    n: parts[1].parse().map_err(|_| bad("bad n"))?,
                    radius: parts[2].parse().map_err(|_| bad("bad radius"))?,
                })
            }
            "icosphere" => {
                if parts.len() != 3 {
                    return Err(bad("expected icosphere:subdivisions:radius"));
                }
                Ok(SpaceKind::Icosphere {
                    subdivisions: parts[1].parse().map_err(|_| bad("bad subdivisions"))?,
                    radius: parts[2].parse().map_err(|_| bad("bad radius"))?,
                })
            }
            "flat_torus" => {
                if parts.len() != 2 {
                    return Err(bad("expected flat_torus:n"));
                }
                Ok(SpaceKind::FlatTorus {
                    n: parts[1].parse().map_err(|_| bad("bad n"))?,
                })
            }
            "cone" => {
                if parts.len() != 4 {
                    return Err(bad("expected cone:total_angle:n_r:n_theta"));
                }
                Ok(SpaceKind::Cone {
                    total_angle: parts[1].parse().map_err(|_| bad("bad angle"))?,
                    n_r: parts[2].parse().map_err(|_| bad("bad n_r"))?,
                    n_theta: parts[3].parse().map_err(|_| bad("bad n_theta"))?,
                })
            }
            "cube_boundary" => {
                if parts.len() != 2 {
                    return Err(bad("expected cube_boundary:n_per_face"));
                }
                Ok(SpaceKind::CubeBoundary {
                    n_per_face: parts[1].parse().map_err(|_| bad("bad n_per_face"))?,
                })
            }
            other => Err(Error::UnknownKind(other.into())),
        }
    }
}

pub fn generate(kind: &SpaceKind) -> Result<DiscreteMMSpace> {
    match *kind {
        SpaceKind::Cycle { n, radius } => cycle(n, radius),
        SpaceKind::Icosphere {
            subdivisions,
            radius,
        } => icosphere(subdivisions, radius),
        SpaceKind::FlatTorus { n } => flat_torus(n),
        SpaceKind::Cone {
            total_angle,
            n_r,
            n_theta,
        } => cone(total_angle, n_r, n_theta),
        SpaceKind::CubeBoundary { n_per_face } => cube_boundary(n_per_face),
    }
}

pub fn cycle(n: usize, radius: f64) -> Result<DiscreteMMSpace> {
    if n < 3 {
        return Err(Error::BadParams(format!("cycle needs n >= 3, got {n}")));
    }
    if !(radius > 0.0) {
        return Err(Error::BadParams(format!("cycle radius {radius} <= 0")));
    }
    let h = 2.0 * PI * radius / n as f64;
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, h, 1.0 / h)).collect();
    let measure = vec![h; n];
    let mut s = DiscreteMMSpace::build(format!("cycle({n}, r={radius})"), n, edges, measure)?;
    let coords: Vec<[f64; 3]> = (0..n)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / n as f64;
            [radius * th.cos(), radius * th.sin(), 0.0]
        })
        .collect();
    s.set_coords(coords);
    s.metadata_mut()
        .insert("kind".into(), serde_json::json!({"cycle": {"n": n, "radius": radius}}));
    Ok(s)
}

fn icosahedron() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut verts = vec![
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    for v in &mut verts {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        *v = [v[0] / norm, v[1] / norm, v[2] / norm];
    }
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (verts, faces)
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn icosphere(subdivisions: u32, radius: f64) -> Result<DiscreteMMSpace> {
    if !(radius > 0.0) {
        return Err(Error::BadParams(format!("icosphere radius {radius} <= 0")));
    }
    if subdivisions > 5 {
        return Err(Error::BadParams(
            "icosphere subdivisions > 5 exceeds desk scale".into(),
        ));
    }
    let (mut verts, mut faces) = icosahedron();
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut new_faces = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let va = verts[a];
                let vb = verts[b];
                let m = normalize([
                    (va[0] + vb[0]) / 2.0,
                    (va[1] + vb[1]) / 2.0,
                    (va[2] + vb[2]) / 2.0,
                ]);
                verts.push(m);
                verts.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            new_faces.push([a, ab, ca]);
            new_faces.push([b, bc, ab]);
            new_faces.push([c, ca, bc]);
            new_faces.push([ab, bc, ca]);
        }
        faces = new_faces;
    }
    let n = verts.len();
    let coords: Vec<[f64; 3]> = verts
        .iter()
        .map(|v| [v[0] * radius, v[1] * radius, v[2] * radius])
        .collect();

    // cotangent conductances and barycentric vertex areas from the embedded
    // flat triangles; edge lengths are great-circle distances
    let mut cot_sum: HashMap<(usize, usize), f64> = HashMap::new();
    let mut area = vec![0.0f64; n];
    for &[a, b, c] in &faces {
        let (pa, pb, pc) = (coords[a], coords[b], coords[c]);
        let tri_area = {
            let cr = cross3(sub3(pb, pa), sub3(pc, pa));
            0.5 * dot3(cr, cr).sqrt()
        };
        area[a] += tri_area / 3.0;
        area[b] += tri_area / 3.0;
        area[c] += tri_area / 3.0;
        let mut add_cot = |i: usize, j: usize, opp: usize| {
            let u = sub3(coords[i], coords[opp]);
            let v = sub3(coords[j], coords[opp]);
            let cot = dot3(u, v) / dot3(cross3(u, v), cross3(u, v)).sqrt();
            *cot_sum.entry((i.min(j), i.max(j))).or_insert(0.0) += cot;
        };
        add_cot(a, b, c);
        add_cot(b, c, a);
        add_cot(c, a, b);
    }
    let geodesic = |i: usize, j: usize| -> f64 {
        let cosang = dot3(verts[i], verts[j]).clamp(-1.0, 1.0);
        radius * cosang.acos()
    };
    let edges: Vec<_> = cot_sum
        .into_iter()
        .map(|((i, j), cs)| (i, j, geodesic(i, j), 0.5 * cs))
        .collect();

    let mut s = DiscreteMMSpace::build(
        format!("icosphere({subdivisions}, r={radius})"),
        n,
        edges,
        area,
    )?;
    s.set_coords(coords);
    s.metadata_mut().insert(
        "kind".into(),
        serde_json::json!({"icosphere": {"subdivisions": subdivisions, "radius": radius}}),
    );
    Ok(s)
}

pub fn flat_torus(n: usize) -> Result<DiscreteMMSpace> {
    if n < 3 {
        return Err(Error::BadParams(format!("flat_torus needs n >= 3, got {n}")));
    }
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| i * n + j;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            edges.push((idx(i, j), idx((i + 1) % n, j), h, 1.0));
            edges.push((idx(i, j), idx(i, (j + 1) % n), h, 1.0));
        }
    }
    let measure = vec![h * h; n * n];
    let mut s = DiscreteMMSpace::build(format!("flat_torus({n}x{n})"), n * n, edges, measure)?;
    let coords: Vec<[f64; 3]> = (0..n * n)
        .map(|k| [(k / n) as f64 * h, (k % n) as f64 * h, 0.0])
        .collect();
    s.set_coords(coords);
    s.metadata_mut()
        .insert("kind".into(), serde_json::json!({"flat_torus": {"n": n}}));
    Ok(s)
}

/// Flat cone of total angle `total_angle` with unit slant radius. A total
/// angle below `2*pi` is a classical nonnegatively curved cone with a
/// singular apex.
pub fn cone(total_angle: f64, n_r: usize, n_theta: usize) -> Result<DiscreteMMSpace> {
    if !(total_angle > 0.0) || n_r == 0 || n_theta < 3 {
        return Err(Error::BadParams(format!(
            "cone({total_angle}, {n_r}, {n_theta}): need angle > 0, n_r >= 1, n_theta >= 3"
        )));
    }
    let dr = 1.0 / n_r as f64;
    let dth = total_angle / n_theta as f64;
    // point 0 is the apex; ring i (1-based) has n_theta points
    let n = 1 + n_r * n_theta;
    let idx = |ring: usize, spoke: usize| 1 + (ring - 1) * n_theta + (spoke % n_theta);
    let mut edges = Vec::new();
    // apex to first ring
    let r_half = 0.5 * dr;
    for s in 0..n_theta {
        edges.push((0, idx(1, s), dr, r_half * dth / dr));
    }
    for ring in 1..=n_r {
        let r = ring as f64 * dr;
        for sp in 0..n_theta {
            // circumferential
            edges.push((idx(ring, sp), idx(ring, sp + 1), r * dth, dr / (r * dth)));
            // radial
            if ring < n_r {
                let r_mid = r + 0.5 * dr;
                edges.push((idx(ring, sp), idx(ring + 1, sp), dr, r_mid * dth / dr));
            }
        }
    }
    let mut measure = vec![0.0; n];
    measure[0] = total_angle * dr * dr / 8.0; // barycentric cell of the apex
    for ring in 1..=n_r {
        let r = ring as f64 * dr;
        // annular cell, clipped at the outer boundary
        let r_in = r - 0.5 * dr;
        let r_out = (r + 0.5 * dr).min(1.0);
        let cell = 0.5 * (r_out * r_out - r_in * r_in) * dth;
        for sp in 0..n_theta {
            measure[idx(ring, sp)] = cell;
        }
    }
    let mut s = DiscreteMMSpace::build(
        format!("cone(angle={total_angle}, {n_r}x{n_theta})"),
        n,
        edges,
        measure,
    )?;
    // embed with the intrinsic angle rescaled to [0, 2*pi)
    let mut coords = vec![[0.0, 0.0, 0.0]; n];
    for ring in 1..=n_r {
        let r = ring as f64 * dr;
        for sp in 0..n_theta {
            let th = 2.0 * PI * sp as f64 / n_theta as f64;
            coords[idx(ring, sp)] = [r * th.cos(), r * th.sin(), 0.0];
        }
    }
    s.set_coords(coords);
    s.metadata_mut().insert(
        "kind".into(),
        serde_json::json!({"cone": {"total_angle": total_angle, "n_r": n_r, "n_theta": n_theta}}),
    );
    Ok(s)
}

/// Cell-centered grid on the boundary of the unit cube: `n_per_face^2`
/// cells per face, folded across the twelve edges. Cell centers on
/// different faces are adjacent exactly when their chord distance is
/// `h/sqrt(2)`, which identifies the fold neighbors.
pub fn cube_boundary(n_per_face: usize) -> Result<DiscreteMMSpace> {
    let k = n_per_face;
    if k == 0 {
        return Err(Error::BadParams("cube_boundary needs n_per_face >= 1".into()));
    }
    if k > 24 {
        return Err(Error::BadParams(
            "cube_boundary n_per_face > 24 exceeds desk scale".into(),
        ));
    }
    let h = 1.0 / k as f64;
    let mut centers: Vec<[f64; 3]> = Vec::with_capacity(6 * k * k);
    // axis: 0=x, 1=y, 2=z; sign: +/- 0.5
    for axis in 0..3 {
        for &sign in &[0.5f64, -0.5] {
            for a in 0..k {
                for b in 0..k {
                    let u = -0.5 + (a as f64 + 0.5) * h;
                    let v = -0.5 + (b as f64 + 0.5) * h;
                    let p = match axis {
                        0 => [sign, u, v],
                        1 => [u, sign, v],
                        _ => [u, v, sign],
                    };
                    centers.push(p);
                }
            }
        }
    }
    let n = centers.len();
    let mut edges = Vec::new();
    let same_face_d2 = h * h;
    let fold_d2 = h * h / 2.0;
    let tol = 1e-9;
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = {
                let d = sub3(centers[i], centers[j]);
                dot3(d, d)
            };
            if (d2 - same_face_d2).abs() < tol || (d2 - fold_d2).abs() < tol {
                edges.push((i, j, h, 1.0));
            }
        }
    }
    let measure = vec![h * h; n];
    let mut s = DiscreteMMSpace::build(format!("cube_boundary({k})"), n, edges, measure)?;
    s.set_coords(centers);
    s.metadata_mut().insert(
        "kind".into(),
        serde_json::json!({"cube_boundary": {"n_per_face": k}}),
    );
    Ok(s)
}
