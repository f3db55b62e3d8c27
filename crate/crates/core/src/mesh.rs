//! Conforming simplicial meshes (triangles in 2D, tetrahedra in 3D) with full
//! face connectivity and the geometric quantities the discretization needs:
//! cell volumes |K| and centroids x_K, face areas |σ| and centroids x_σ, and
//! the outward area vectors a_{K,σ} = |σ|·n_{K,σ} per (cell, face) incidence.
//!
//! Faces are identified by their sorted vertex tuple; the global face ordering
//! is lexicographic by that tuple, which fixes a stable, reproducible DOF
//! numbering downstream. Meshes are immutable after construction.

use crate::geom::{cross, dist, dot, norm, scale, sub, Point};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("dimension {0} not supported (expected 2 or 3)")]
    BadDimension(usize),
    #[error("cell {cell} has {got} vertices, expected {expected}")]
    BadCellArity { cell: usize, got: usize, expected: usize },
    #[error("cell {cell} references vertex {vertex} of {nv}")]
    VertexOutOfRange { cell: usize, vertex: usize, nv: usize },
    #[error("cell {cell} repeats vertex {vertex}")]
    RepeatedVertex { cell: usize, vertex: usize },
    #[error("cell {cell} is degenerate (volume {volume:.3e})")]
    DegenerateCell { cell: usize, volume: f64 },
    #[error("face {face:?} is shared by more than two cells (non-manifold input)")]
    NonManifold { face: Vec<usize> },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A conforming simplicial mesh with precomputed connectivity and geometry.
///
/// For each cell, `cell_faces[k][l]` is the face opposite the local vertex
/// `cells[k][l]`, and `area_vec[k][l]` is the outward area vector of that face
/// seen from cell `k`. For each face, `face_cells` lists the one or two
/// incident cells in ascending cell-index order.
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    pub dim: usize,
    pub vertices: Vec<Point>,
    /// Per cell, the d+1 vertex indices.
    pub cells: Vec<Vec<usize>>,
    /// Per face, the d vertex indices, sorted ascending. Face indices follow
    /// the lexicographic order of these tuples.
    pub faces: Vec<Vec<usize>>,
    /// Per cell, the d+1 face indices; slot l holds the face opposite vertex l.
    pub cell_faces: Vec<Vec<usize>>,
    /// Per face, the incident cells: (lower index, Some(higher index)) for an
    /// interior face, (cell, None) for a boundary face.
    pub face_cells: Vec<(usize, Option<usize>)>,
    /// Cell volumes |K|.
    pub volume: Vec<f64>,
    /// Cell centroids x_K (arithmetic mean of the vertices).
    pub centroid: Vec<Point>,
    /// Face areas |σ|.
    pub face_area: Vec<f64>,
    /// Face centroids x_σ (arithmetic mean of the face vertices).
    pub face_centroid: Vec<Point>,
    /// Outward area vectors a_{K,σ}, aligned with `cell_faces`.
    pub area_vec: Vec<Vec<Point>>,
    /// Mesh size h = max cell diameter.
    pub h: f64,
}

impl SimplicialMesh {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn is_boundary_face(&self, face: usize) -> bool {
        self.face_cells[face].1.is_none()
    }

    /// Local slot of `face` within cell `k`.
    ///
    /// # Panics
    /// Panics if `face` is not a face of cell `k` (caller bug).
    pub fn local_slot(&self, k: usize, face: usize) -> usize {
        self.cell_faces[k]
            .iter()
            .position(|&f| f == face)
            .unwrap_or_else(|| panic!("face {face} is not a face of cell {k}"))
    }

    /// The vertex of cell `k` opposite its local face slot `l`.
    pub fn opposite_vertex(&self, k: usize, slot: usize) -> usize {
        self.cells[k][slot]
    }

    /// Outward area vector of `face` seen from cell `k`.
    pub fn area_vec_of(&self, k: usize, face: usize) -> Point {
        self.area_vec[k][self.local_slot(k, face)]
    }
}

/// Builds connectivity and geometry from raw cells, deduplicating faces by
/// sorted vertex tuple.
///
/// Reports non-manifold input (a face with more than two incident cells) and
/// zero or negative cell volumes.
pub fn build_connectivity(
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
) -> Result<SimplicialMesh, MeshError> {
    if dim != 2 && dim != 3 {
        return Err(MeshError::BadDimension(dim));
    }
    let nv = vertices.len();
    for (k, cell) in cells.iter().enumerate() {
        if cell.len() != dim + 1 {
            return Err(MeshError::BadCellArity { cell: k, got: cell.len(), expected: dim + 1 });
        }
        for &v in cell {
            if v >= nv {
                return Err(MeshError::VertexOutOfRange { cell: k, vertex: v, nv });
            }
        }
        for (i, &v) in cell.iter().enumerate() {
            if cell[i + 1..].contains(&v) {
                return Err(MeshError::RepeatedVertex { cell: k, vertex: v });
            }
        }
    }

    // Collect faces keyed by sorted vertex tuple; BTreeMap iteration order is
    // the lexicographic global face ordering.
    let mut face_map: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
    for (k, cell) in cells.iter().enumerate() {
        for slot in 0..=dim {
            let mut fv: Vec<usize> =
                cell.iter().enumerate().filter(|&(l, _)| l != slot).map(|(_, &v)| v).collect();
            fv.sort_unstable();
            face_map.entry(fv).or_default().push((k, slot));
        }
    }

    let mut faces = Vec::with_capacity(face_map.len());
    let mut face_cells = Vec::with_capacity(face_map.len());
    let mut cell_faces = vec![vec![usize::MAX; dim + 1]; cells.len()];
    for (fv, incident) in face_map {
        if incident.len() > 2 {
            return Err(MeshError::NonManifold { face: fv });
        }
        let fid = faces.len();
        let mut ks: Vec<usize> = incident.iter().map(|&(k, _)| k).collect();
        ks.sort_unstable();
        face_cells.push((ks[0], ks.get(1).copied()));
        for (k, slot) in incident {
            cell_faces[k][slot] = fid;
        }
        faces.push(fv);
    }

    // Geometry.
    let mut volume = Vec::with_capacity(cells.len());
    let mut centroid = Vec::with_capacity(cells.len());
    let mut h = 0.0f64;
    for (k, cell) in cells.iter().enumerate() {
        let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
        let vol = simplex_volume(dim, &pts);
        let diam = max_pairwise_distance(&pts);
        if !(vol > 1e-14 * diam.powi(dim as i32)) {
            return Err(MeshError::DegenerateCell { cell: k, volume: vol });
        }
        volume.push(vol);
        let mut c = [0.0; 3];
        for p in &pts {
            c = crate::geom::add(c, *p);
        }
        centroid.push(scale(1.0 / (dim + 1) as f64, c));
        h = h.max(diam);
    }

    let mut face_area = Vec::with_capacity(faces.len());
    let mut face_centroid = Vec::with_capacity(faces.len());
    for fv in &faces {
        let pts: Vec<Point> = fv.iter().map(|&v| vertices[v]).collect();
        let a = face_vector(dim, &pts);
        face_area.push(norm(a));
        let mut c = [0.0; 3];
        for p in &pts {
            c = crate::geom::add(c, *p);
        }
        face_centroid.push(scale(1.0 / dim as f64, c));
    }

    // Outward area vectors: orient the raw face vector away from the cell
    // centroid.
    let mut area_vec = Vec::with_capacity(cells.len());
    for k in 0..cells.len() {
        let mut avs = Vec::with_capacity(dim + 1);
        for slot in 0..=dim {
            let f = cell_faces[k][slot];
            let pts: Vec<Point> = faces[f].iter().map(|&v| vertices[v]).collect();
            let mut a = face_vector(dim, &pts);
            if dot(a, sub(face_centroid[f], centroid[k])) < 0.0 {
                a = scale(-1.0, a);
            }
            avs.push(a);
        }
        area_vec.push(avs);
    }

    Ok(SimplicialMesh {
        dim,
        vertices,
        cells,
        faces,
        cell_faces,
        face_cells,
        volume,
        centroid,
        face_area,
        face_centroid,
        area_vec,
        h,
    })
}

/// Volume of a d-simplex given its d+1 vertices.
fn simplex_volume(dim: usize, pts: &[Point]) -> f64 {
    match dim {
        2 => {
            let u = sub(pts[1], pts[0]);
            let v = sub(pts[2], pts[0]);
            0.5 * (u[0] * v[1] - u[1] * v[0]).abs()
        }
        3 => {
            let u = sub(pts[1], pts[0]);
            let v = sub(pts[2], pts[0]);
            let w = sub(pts[3], pts[0]);
            dot(u, cross(v, w)).abs() / 6.0
        }
        _ => unreachable!(),
    }
}

/// Unoriented area vector of a face given its d vertices: edge normal in 2D,
/// half cross product in 3D. Length equals the face measure |σ|.
fn face_vector(dim: usize, pts: &[Point]) -> Point {
    match dim {
        2 => {
            let t = sub(pts[1], pts[0]);
            [t[1], -t[0], 0.0]
        }
        3 => scale(0.5, cross(sub(pts[1], pts[0]), sub(pts[2], pts[0]))),
        _ => unreachable!(),
    }
}

fn max_pairwise_distance(pts: &[Point]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max(dist(pts[i], pts[j]));
        }
    }
    d
}

/// n×n grid of squares of side 1/n, each split into two triangles along the
/// lower-left → upper-right diagonal. Mesh size h = √2/n.
pub fn build_unit_square_mesh(n: usize) -> SimplicialMesh {
    assert!(n >= 1, "mesh level must be at least 1");
    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64, 0.0]);
        }
    }
    let v = |i: usize, j: usize| j * np + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (ll, lr, ul, ur) = (v(i, j), v(i + 1, j), v(i, j + 1), v(i + 1, j + 1));
            cells.push(vec![ll, lr, ur]);
            cells.push(vec![ll, ur, ul]);
        }
    }
    build_connectivity(2, vertices, cells).expect("structured square mesh is valid")
}

/// n³ grid of cubes of side 1/n, each split into 6 tetrahedra sharing the
/// main diagonal (Kuhn subdivision), so every tetrahedron has volume 1/(6n³)
/// and the induced surface triangulations match between neighboring cubes.
pub fn build_unit_cube_mesh(n: usize) -> SimplicialMesh {
    assert!(n >= 1, "mesh level must be at least 1");
    let np = n + 1;
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64]);
            }
        }
    }
    let v = |i: usize, j: usize, k: usize| (k * np + j) * np + i;
    // Walks from the cube's min corner to its max corner, one axis at a time;
    // each of the 6 axis orders yields one tetrahedron.
    const ORDERS: [[usize; 3]; 6] =
        [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for order in ORDERS {
                    let mut at = [i, j, k];
                    let mut tet = vec![v(at[0], at[1], at[2])];
                    for &axis in &order {
                        at[axis] += 1;
                        tet.push(v(at[0], at[1], at[2]));
                    }
                    cells.push(tet);
                }
            }
        }
    }
    build_connectivity(3, vertices, cells).expect("structured cube mesh is valid")
}

/// Writes the plain-text mesh format: line 1 `dim nv nc`, then nv coordinate
/// lines, then nc lines of d+1 vertex indices (0-based).
pub fn write_mesh(mesh: &SimplicialMesh, path: &Path) -> Result<(), MeshError> {
    let mut out = String::new();
    writeln!(out, "{} {} {}", mesh.dim, mesh.vertices.len(), mesh.cells.len()).unwrap();
    for p in &mesh.vertices {
        for i in 0..mesh.dim {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{}", p[i]).unwrap();
        }
        out.push('\n');
    }
    for cell in &mesh.cells {
        let line: Vec<String> = cell.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads the plain-text mesh format and rebuilds connectivity.
pub fn read_mesh(path: &Path) -> Result<SimplicialMesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    let mut cursor = Tokens { path: path.display().to_string(), tokens: text.split_whitespace() };
    let dim: usize = cursor.next("dimension")?;
    if dim != 2 && dim != 3 {
        return Err(MeshError::BadDimension(dim));
    }
    let nv: usize = cursor.next("vertex count")?;
    let nc: usize = cursor.next("cell count")?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let mut p = [0.0; 3];
        for c in 0..dim {
            p[c] = cursor.next(&format!("coordinate {c} of vertex {i}"))?;
        }
        vertices.push(p);
    }
    let mut cells = Vec::with_capacity(nc);
    for k in 0..nc {
        let mut cell = Vec::with_capacity(dim + 1);
        for l in 0..=dim {
            cell.push(cursor.next(&format!("vertex {l} of cell {k}"))?);
        }
        cells.push(cell);
    }
    if cursor.tokens.next().is_some() {
        return Err(cursor.error("trailing data after the last cell"));
    }
    build_connectivity(dim, vertices, cells)
}

struct Tokens<'a> {
    path: String,
    tokens: std::str::SplitWhitespace<'a>,
}

impl Tokens<'_> {
    fn error(&self, msg: impl Into<String>) -> MeshError {
        MeshError::Format { path: self.path.clone(), msg: msg.into() }
    }

    fn next<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, MeshError>
    where
        T::Err: std::fmt::Display,
    {
        let tok = self
            .tokens
            .next()
            .ok_or_else(|| self.error(format!("unexpected end of file reading {what}")))?;
        tok.parse().map_err(|e| self.error(format!("cannot parse {what}: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::add;

    fn check_invariants(mesh: &SimplicialMesh, domain_measure: f64) {
        // Closed-surface identity per cell.
        for k in 0..mesh.n_cells() {
            let mut sum = [0.0; 3];
            let mut scale_sum = 0.0;
            for a in &mesh.area_vec[k] {
                sum = add(sum, *a);
                scale_sum += norm(*a);
            }
            assert!(norm(sum) <= 1e-12 * scale_sum, "cell {k}: Σa = {sum:?}");
        }
        // Interior faces seen with opposite orientations from their two cells.
        for f in 0..mesh.n_faces() {
            let (k, other) = mesh.face_cells[f];
            if let Some(l) = other {
                let ak = mesh.area_vec_of(k, f);
                let al = mesh.area_vec_of(l, f);
                assert!(norm(add(ak, al)) <= 1e-12 * norm(ak), "face {f}");
                assert!(k < l, "face_cells must be ascending");
            }
        }
        // Volumes partition the domain.
        let total: f64 = mesh.volume.iter().sum();
        assert!((total - domain_measure).abs() <= 1e-12 * domain_measure);
        // Face centroids are vertex means (by construction; spot check).
        for f in 0..mesh.n_faces() {
            let mut c = [0.0; 3];
            for &v in &mesh.faces[f] {
                c = add(c, mesh.vertices[v]);
            }
            c = scale(1.0 / mesh.dim as f64, c);
            assert!(dist(c, mesh.face_centroid[f]) <= 1e-15);
        }
    }

    fn interior_count(mesh: &SimplicialMesh) -> usize {
        (0..mesh.n_faces()).filter(|&f| !mesh.is_boundary_face(f)).count()
    }

    #[test]
    fn square_n1_counts() {
        let mesh = build_unit_square_mesh(1);
        assert_eq!(mesh.n_cells(), 2);
        assert_eq!(mesh.n_faces(), 5);
        assert_eq!(interior_count(&mesh), 1);
        check_invariants(&mesh, 1.0);
    }

    #[test]
    fn square_n1_area_vectors() {
        // Triangle {(0,0),(1,0),(1,1)}: a-vectors (0,-1), (1,0), (-1,1).
        let mesh = build_unit_square_mesh(1);
        let k = 0;
        assert_eq!(mesh.cells[k], vec![0, 1, 3]);
        let mut avs: Vec<Point> = mesh.area_vec[k].clone();
        avs.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(avs[0], [-1.0, 1.0, 0.0]);
        assert_eq!(avs[1], [0.0, -1.0, 0.0]);
        assert_eq!(avs[2], [1.0, 0.0, 0.0]);
        let total = avs.iter().fold([0.0; 3], |acc, a| add(acc, *a));
        assert_eq!(total, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn square_n2_counts() {
        let mesh = build_unit_square_mesh(2);
        assert_eq!(mesh.n_cells(), 8);
        assert_eq!(mesh.n_faces(), 16);
        assert_eq!(interior_count(&mesh), 8);
        check_invariants(&mesh, 1.0);
    }

    #[test]
    fn square_counts_formula() {
        for n in [3, 5] {
            let mesh = build_unit_square_mesh(n);
            assert_eq!(mesh.n_cells(), 2 * n * n);
            assert_eq!(mesh.n_faces(), 3 * n * n + 2 * n);
            assert_eq!(interior_count(&mesh), 3 * n * n - 2 * n);
            assert!((mesh.h - (2.0f64).sqrt() / n as f64).abs() < 1e-14);
            check_invariants(&mesh, 1.0);
        }
    }

    #[test]
    fn cube_n1_six_tets_of_equal_volume() {
        let mesh = build_unit_cube_mesh(1);
        assert_eq!(mesh.n_cells(), 6);
        for &v in &mesh.volume {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
        check_invariants(&mesh, 1.0);
    }

    #[test]
    fn cube_counts() {
        let mesh = build_unit_cube_mesh(2);
        assert_eq!(mesh.n_cells(), 48);
        check_invariants(&mesh, 1.0);
        // 4 face slots per tet; the boundary is 2 triangles per square per side.
        let boundary = (0..mesh.n_faces()).filter(|&f| mesh.is_boundary_face(f)).count();
        assert_eq!(boundary, 2 * 2 * 2 * 6);
        assert_eq!(interior_count(&mesh), (4 * 48 - boundary) / 2);
    }

    #[test]
    fn connectivity_two_triangles() {
        let vertices = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let cells = vec![vec![0, 1, 2], vec![0, 2, 3]];
        let mesh = build_connectivity(2, vertices, cells).unwrap();
        let shared: Vec<usize> =
            (0..mesh.n_faces()).filter(|&f| !mesh.is_boundary_face(f)).collect();
        assert_eq!(shared.len(), 1);
        assert_eq!(mesh.faces[shared[0]], vec![0, 2]);
        assert_eq!(mesh.face_cells[shared[0]], (0, Some(1)));
    }

    #[test]
    fn connectivity_single_triangle() {
        let vertices = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let mesh = build_connectivity(2, vertices, vec![vec![0, 1, 2]]).unwrap();
        assert_eq!(mesh.n_faces(), 3);
        assert_eq!(interior_count(&mesh), 0);
    }

    #[test]
    fn connectivity_rejects_duplicate_cell() {
        // Duplicating a cell puts three cells on its neighbor-shared edge.
        let vertices = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let cells = vec![vec![0, 1, 2], vec![0, 2, 3], vec![0, 1, 2]];
        match build_connectivity(2, vertices, cells) {
            Err(MeshError::NonManifold { face }) => assert_eq!(face, vec![0, 2]),
            other => panic!("expected non-manifold error, got {other:?}"),
        }
    }

    #[test]
    fn connectivity_rejects_degenerate_cell() {
        let vertices = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        match build_connectivity(2, vertices, vec![vec![0, 1, 2]]) {
            Err(MeshError::DegenerateCell { cell: 0, .. }) => {}
            other => panic!("expected degenerate-cell error, got {other:?}"),
        }
    }

    #[test]
    fn io_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("square.mesh");
        let mesh = build_unit_square_mesh(1);
        write_mesh(&mesh, &path).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(back.n_cells(), 2);
        assert_eq!(back.n_faces(), 5);
        assert_eq!(back.vertices, mesh.vertices);
        assert_eq!(back.cells, mesh.cells);

        let path3 = dir.path().join("cube.mesh");
        let mesh3 = build_unit_cube_mesh(2);
        write_mesh(&mesh3, &path3).unwrap();
        let back3 = read_mesh(&path3).unwrap();
        assert_eq!(back3.vertices, mesh3.vertices);
        assert_eq!(back3.cells, mesh3.cells);
    }

    #[test]
    fn io_rejects_bad_dimension() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mesh");
        std::fs::write(&path, "4 0 0\n").unwrap();
        match read_mesh(&path) {
            Err(MeshError::BadDimension(4)) => {}
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn io_rejects_vertex_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mesh");
        std::fs::write(&path, "2 4 1\n0 0\n1 0\n1 1\n0 1\n0 1 999\n").unwrap();
        match read_mesh(&path) {
            Err(MeshError::VertexOutOfRange { cell: 0, vertex: 999, nv: 4 }) => {}
            other => panic!("expected out-of-range error, got {other:?}"),
        }
    }

    #[test]
    fn io_rejects_truncated_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mesh");
        std::fs::write(&path, "2 4 1\n0 0\n1 0\n").unwrap();
        assert!(matches!(read_mesh(&path), Err(MeshError::Format { .. })));
    }
}
