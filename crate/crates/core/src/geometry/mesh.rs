use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use super::domain::point_in_polygon;
use super::{Domain, GeometryError};

/// Boundary condition carried by a boundary facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
    Robin,
    /// Portion of the boundary where Cauchy data (trace and flux) is observed.
    Cauchy,
    /// Portion of the boundary where nothing is observed.
    Inaccessible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFacet {
    pub nodes: Vec<usize>,
    pub tag: BoundaryTag,
}

/// Conforming simplicial mesh in one or two dimensions.
///
/// Coordinates and connectivity are stored flat; `vertex(i)` and `cell(c)`
/// return slices. Boundary conditions live on facets so that a corner shared
/// by two differently tagged edges is never ambiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialMesh {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    boundary: Vec<BoundaryFacet>,
    boundary_facets: Vec<Vec<usize>>,
    facet_owner: HashMap<Vec<usize>, usize>,
}

#[derive(Serialize, Deserialize)]
struct MeshJson {
    vertices: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    boundary: Vec<FacetJson>,
}

#[derive(Serialize, Deserialize)]
struct FacetJson {
    facet: Vec<usize>,
    tag: BoundaryTag,
}

impl SimplicialMesh {
    /// Validates orientation, conformity and tag placement.
    ///
    /// Tags may leave boundary facets uncovered; [`Self::check_tags`] reports
    /// those, and assembly calls it.
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        cells: Vec<usize>,
        boundary: Vec<BoundaryFacet>,
    ) -> Result<Self, GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidMesh(m));
        if !(1..=2).contains(&dim) {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        if !coords.len().is_multiple_of(dim) || !cells.len().is_multiple_of(dim + 1) {
            return bad("coordinate or cell array length mismatch".into());
        }
        let nv = coords.len() / dim;
        if let Some(&i) = cells.iter().find(|&&i| i >= nv) {
            return bad(format!("cell references vertex {i} of {nv}"));
        }
        let mut mesh = SimplicialMesh {
            dim,
            coords,
            cells,
            boundary,
            boundary_facets: Vec::new(),
            facet_owner: HashMap::new(),
        };
        for c in 0..mesh.num_cells() {
            if !(mesh.cell_measure_signed(c) > 0.0) {
                return bad(format!("cell {c} has non-positive signed measure"));
            }
        }
        let mut counts: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for c in 0..mesh.num_cells() {
            for f in mesh.cell_facets(c) {
                counts.entry(f).or_insert((0, c)).0 += 1;
            }
        }
        if let Some((f, (n, _))) = counts.iter().find(|(_, &(n, _))| n > 2) {
            return bad(format!("facet {f:?} shared by {n} cells"));
        }
        counts.retain(|_, (n, _)| *n == 1);
        mesh.facet_owner = counts.iter().map(|(f, &(_, c))| (f.clone(), c)).collect();
        let mut facets: Vec<Vec<usize>> = counts.into_keys().collect();
        facets.sort();
        let mut seen = HashMap::new();
        for (k, bf) in mesh.boundary.iter().enumerate() {
            let key = sorted(&bf.nodes);
            if facets.binary_search(&key).is_err() {
                return bad(format!("tagged facet {:?} is not a boundary facet", bf.nodes));
            }
            if seen.insert(key, k).is_some() {
                return bad(format!("facet {:?} carries more than one tag", bf.nodes));
            }
        }
        mesh.boundary_facets = facets;
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cells[c * k..(c + 1) * k]
    }

    pub fn boundary(&self) -> &[BoundaryFacet] {
        &self.boundary
    }

    /// Every geometric boundary facet (sorted node lists), tagged or not.
    pub fn boundary_facets(&self) -> &[Vec<usize>] {
        &self.boundary_facets
    }

    pub fn check_tags(&self) -> Result<(), GeometryError> {
        if self.boundary.len() != self.boundary_facets.len() {
            let tagged: Vec<Vec<usize>> = self.boundary.iter().map(|f| sorted(&f.nodes)).collect();
            let missing = self
                .boundary_facets
                .iter()
                .find(|f| !tagged.contains(f))
                .cloned()
                .unwrap_or_default();
            return Err(GeometryError::UntaggedBoundaryFacet(missing));
        }
        Ok(())
    }

    /// Replaces all tags using a rule on facet midpoints.
    pub fn retag(&mut self, rule: impl Fn(&[f64]) -> BoundaryTag) {
        let facets = self.boundary_facets.clone();
        self.boundary = facets
            .into_iter()
            .map(|nodes| {
                let mid = self.facet_midpoint(&nodes);
                BoundaryFacet {
                    tag: rule(&mid),
                    nodes,
                }
            })
            .collect();
    }

    pub fn facet_midpoint(&self, nodes: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for &i in nodes {
            for (k, v) in self.vertex(i).iter().enumerate() {
                m[k] += v / nodes.len() as f64;
            }
        }
        m
    }

    /// Facet measure: edge length in 2D, one in 1D (point facets).
    pub fn facet_measure(&self, nodes: &[usize]) -> f64 {
        if self.dim == 1 {
            1.0
        } else {
            crate::small::dist(self.vertex(nodes[0]), self.vertex(nodes[1]))
        }
    }

    /// Outward unit normal of a boundary facet.
    pub fn facet_normal(&self, nodes: &[usize]) -> Vec<f64> {
        let mid = self.facet_midpoint(nodes);
        let c = self
            .owning_cell(nodes)
            .expect("boundary facet belongs to a cell");
        let centroid = self.cell_centroid(c);
        if self.dim == 1 {
            return vec![if mid[0] > centroid[0] { 1.0 } else { -1.0 }];
        }
        let (a, b) = (self.vertex(nodes[0]), self.vertex(nodes[1]));
        let len = crate::small::dist(a, b);
        let mut n = vec![(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
        if n[0] * (mid[0] - centroid[0]) + n[1] * (mid[1] - centroid[1]) < 0.0 {
            n.iter_mut().for_each(|v| *v = -*v);
        }
        n
    }

    fn owning_cell(&self, nodes: &[usize]) -> Option<usize> {
        self.facet_owner.get(&sorted(nodes)).copied()
    }

    pub fn cell_facets(&self, c: usize) -> Vec<Vec<usize>> {
        let cell = self.cell(c);
        if self.dim == 1 {
            vec![vec![cell[0]], vec![cell[1]]]
        } else {
            vec![
                sorted(&[cell[0], cell[1]]),
                sorted(&[cell[1], cell[2]]),
                sorted(&[cell[2], cell[0]]),
            ]
        }
    }

    fn cell_measure_signed(&self, c: usize) -> f64 {
        let cell = self.cell(c);
        if self.dim == 1 {
            self.vertex(cell[1])[0] - self.vertex(cell[0])[0]
        } else {
            let (a, b, p) = (self.vertex(cell[0]), self.vertex(cell[1]), self.vertex(cell[2]));
            0.5 * ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]))
        }
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        self.cell_measure_signed(c)
    }

    pub fn cell_centroid(&self, c: usize) -> Vec<f64> {
        let cell = self.cell(c);
        let mut m = vec![0.0; self.dim];
        for &i in cell {
            for (k, v) in self.vertex(i).iter().enumerate() {
                m[k] += v / cell.len() as f64;
            }
        }
        m
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_measure(c)).sum()
    }

    /// Vertices lying on any boundary facet.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_vertices()];
        for f in &self.boundary_facets {
            for &i in f {
                mask[i] = true;
            }
        }
        mask
    }

    /// Vertices touching a facet with the given tag.
    pub fn tagged_vertex_mask(&self, tag: BoundaryTag) -> Vec<bool> {
        let mut mask = vec![false; self.num_vertices()];
        for f in self.boundary.iter().filter(|f| f.tag == tag) {
            for &i in &f.nodes {
                mask[i] = true;
            }
        }
        mask
    }

    /// Longest cell edge.
    pub fn max_edge(&self) -> f64 {
        let mut h: f64 = 0.0;
        for c in 0..self.num_cells() {
            let cell = self.cell(c);
            for a in 0..cell.len() {
                for b in a + 1..cell.len() {
                    h = h.max(crate::small::dist(self.vertex(cell[a]), self.vertex(cell[b])));
                }
            }
        }
        h
    }

    /// Uniform scaling of all coordinates about the origin.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut m = self.clone();
        m.coords.iter_mut().for_each(|v| *v *= factor);
        m
    }

    /// Cell containing `x` and its barycentric coordinates.
    pub fn locate(&self, x: &[f64]) -> Option<(usize, Vec<f64>)> {
        let tol = -1e-12;
        for c in 0..self.num_cells() {
            let bary = self.barycentric(c, x);
            if bary.iter().all(|&l| l >= tol) {
                return Some((c, bary));
            }
        }
        None
    }

    pub fn barycentric(&self, c: usize, x: &[f64]) -> Vec<f64> {
        let cell = self.cell(c);
        if self.dim == 1 {
            let (a, b) = (self.vertex(cell[0])[0], self.vertex(cell[1])[0]);
            let t = (x[0] - a) / (b - a);
            return vec![1.0 - t, t];
        }
        let (a, b, p) = (self.vertex(cell[0]), self.vertex(cell[1]), self.vertex(cell[2]));
        let det = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let l1 = ((x[0] - a[0]) * (p[1] - a[1]) - (x[1] - a[1]) * (p[0] - a[0])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])) / det;
        vec![1.0 - l1 - l2, l1, l2]
    }

    pub fn to_json(&self) -> String {
        let doc = MeshJson {
            vertices: (0..self.num_vertices()).map(|i| self.vertex(i).to_vec()).collect(),
            cells: (0..self.num_cells()).map(|c| self.cell(c).to_vec()).collect(),
            boundary: self
                .boundary
                .iter()
                .map(|f| FacetJson {
                    facet: f.nodes.clone(),
                    tag: f.tag,
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("mesh serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let doc: MeshJson =
            serde_json::from_str(text).map_err(|e| GeometryError::MeshFormat(e.to_string()))?;
        let dim = doc.vertices.first().map_or(0, Vec::len);
        if doc.vertices.iter().any(|v| v.len() != dim) || doc.cells.iter().any(|c| c.len() != dim + 1) {
            return Err(GeometryError::MeshFormat("inconsistent vertex or cell arity".into()));
        }
        let boundary = doc
            .boundary
            .into_iter()
            .map(|f| BoundaryFacet {
                nodes: f.facet,
                tag: f.tag,
            })
            .collect();
        Self::new(
            dim,
            doc.vertices.concat(),
            doc.cells.concat(),
            boundary,
        )
    }
}

fn sorted(nodes: &[usize]) -> Vec<usize> {
    let mut v = nodes.to_vec();
    v.sort_unstable();
    v
}

/// Uniform mesh of a rectangle (interval in 1D), every facet Dirichlet.
pub fn build_rect_mesh(domain: &Domain, h: f64) -> Result<SimplicialMesh, GeometryError> {
    build_rect_mesh_tagged(domain, h, |_| BoundaryTag::Dirichlet)
}

/// Uniform mesh of a rectangle with boundary tags chosen from facet midpoints.
///
/// Each axis gets `ceil(side / h)` cells; in 2D each grid square is split
/// along its main diagonal into two right triangles.
pub fn build_rect_mesh_tagged(
    domain: &Domain,
    h: f64,
    tags: impl Fn(&[f64]) -> BoundaryTag,
) -> Result<SimplicialMesh, GeometryError> {
    let Domain::Rectangle { lower, upper } = domain else {
        return Err(GeometryError::InvalidDomain("build_rect_mesh needs a rectangle".into()));
    };
    if !(h > 0.0) {
        return Err(GeometryError::NonPositiveH);
    }
    let sides: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| b - a).collect();
    let min_side = sides.iter().copied().fold(f64::INFINITY, f64::min);
    if h >= min_side {
        return Err(GeometryError::HExceedsSide { h, side: min_side });
    }
    let counts: Vec<usize> = sides.iter().map(|s| (s / h - 1e-9).ceil() as usize).collect();
    let mut mesh = match lower.len() {
        1 => {
            let n = counts[0];
            let coords = (0..=n).map(|i| lower[0] + sides[0] * i as f64 / n as f64).collect();
            let cells = (0..n).flat_map(|i| [i, i + 1]).collect();
            SimplicialMesh::new(1, coords, cells, Vec::new())?
        }
        2 => {
            let (nx, ny) = (counts[0], counts[1]);
            let mut coords = Vec::with_capacity(2 * (nx + 1) * (ny + 1));
            for j in 0..=ny {
                for i in 0..=nx {
                    coords.push(lower[0] + sides[0] * i as f64 / nx as f64);
                    coords.push(lower[1] + sides[1] * j as f64 / ny as f64);
                }
            }
            let id = |i: usize, j: usize| j * (nx + 1) + i;
            let mut cells = Vec::with_capacity(6 * nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                    cells.extend_from_slice(&[a, b, c, a, c, d]);
                }
            }
            SimplicialMesh::new(2, coords, cells, Vec::new())?
        }
        n => return Err(GeometryError::UnsupportedDimension(n)),
    };
    mesh.retag(tags);
    Ok(mesh)
}

/// Mesh of a polygon from the uniform grid of its bounding box.
///
/// Triangles whose centroid falls inside the polygon are kept. The result
/// follows the polygon exactly when its vertices lie on the grid (for
/// example an L-shape with `h` dividing the arm width); otherwise the
/// boundary is a staircase approximation.
pub fn build_polygon_mesh(
    domain: &Domain,
    h: f64,
    tags: impl Fn(&[f64]) -> BoundaryTag,
) -> Result<SimplicialMesh, GeometryError> {
    let Domain::Polygon { vertices } = domain else {
        return Err(GeometryError::InvalidDomain("build_polygon_mesh needs a polygon".into()));
    };
    let (lo, hi) = domain.bounding_box();
    let rect = Domain::rectangle(&lo, &hi)?;
    let grid = build_rect_mesh(&rect, h)?;
    let mut keep = Vec::new();
    for c in 0..grid.num_cells() {
        let m = grid.cell_centroid(c);
        if point_in_polygon(vertices, &[m[0], m[1]]) {
            keep.push(c);
        }
    }
    if keep.is_empty() {
        return Err(GeometryError::InvalidMesh("polygon contains no grid cell".into()));
    }
    let mut remap = vec![usize::MAX; grid.num_vertices()];
    let mut coords = Vec::new();
    let mut cells = Vec::with_capacity(3 * keep.len());
    for &c in &keep {
        for &v in grid.cell(c) {
            if remap[v] == usize::MAX {
                remap[v] = coords.len() / 2;
                coords.extend_from_slice(grid.vertex(v));
            }
            cells.push(remap[v]);
        }
    }
    let mut mesh = SimplicialMesh::new(2, coords, cells, Vec::new())?;
    mesh.retag(tags);
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_counts() {
        let sq = Domain::unit_square();
        let m = build_rect_mesh(&sq, 0.5).unwrap();
        assert_eq!((m.num_vertices(), m.num_cells()), (9, 8));
        let m = build_rect_mesh(&sq, 0.25).unwrap();
        assert_eq!((m.num_vertices(), m.num_cells()), (25, 32));
        assert_eq!(m.boundary().len(), 16);
        assert!(m.check_tags().is_ok());
        assert!((m.total_measure() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rect_errors() {
        let sq = Domain::unit_square();
        assert_eq!(build_rect_mesh(&sq, 2.0).unwrap_err(), GeometryError::HExceedsSide { h: 2.0, side: 1.0 });
        assert_eq!(build_rect_mesh(&sq, 0.0).unwrap_err(), GeometryError::NonPositiveH);
        assert_eq!(build_rect_mesh(&sq, -1.0).unwrap_err(), GeometryError::NonPositiveH);
    }

    #[test]
    fn interval_mesh() {
        let m = build_rect_mesh(&Domain::interval(0.0, 1.0).unwrap(), 0.1).unwrap();
        assert_eq!((m.num_vertices(), m.num_cells()), (11, 10));
        assert_eq!(m.boundary().len(), 2);
        assert_eq!(m.facet_normal(&[0]), vec![-1.0]);
    }

    #[test]
    fn l_shape_mesh() {
        let l = Domain::l_shape(1.0).unwrap();
        let m = build_polygon_mesh(&l, 0.25, |_| BoundaryTag::Dirichlet).unwrap();
        assert!((m.total_measure() - 3.0).abs() < 1e-13);
        assert_eq!(m.boundary().len(), 8 * 4);
    }

    #[test]
    fn normals_point_outward() {
        let m = build_rect_mesh(&Domain::unit_square(), 0.5).unwrap();
        for f in m.boundary() {
            let n = m.facet_normal(&f.nodes);
            let mid = m.facet_midpoint(&f.nodes);
            assert!(n[0] * (mid[0] - 0.5) + n[1] * (mid[1] - 0.5) > 0.0);
        }
    }

    #[test]
    fn json_round_trip() {
        let m = build_rect_mesh(&Domain::unit_square(), 0.5).unwrap();
        let text = m.to_json();
        assert!(text.contains("\"tag\":\"dirichlet\""));
        let back = SimplicialMesh::from_json(&text).unwrap();
        assert_eq!(back.num_cells(), 8);
        assert!(back.check_tags().is_ok());
    }

    #[test]
    fn rejects_inverted_and_nonconforming() {
        let inverted = SimplicialMesh::new(2, vec![0., 0., 0., 1., 1., 0.], vec![0, 1, 2], vec![]);
        assert!(inverted.is_err());
        let partial = SimplicialMesh::new(2, vec![0., 0., 1., 0., 0., 1.], vec![0, 1, 2], vec![]).unwrap();
        assert!(matches!(partial.check_tags(), Err(GeometryError::UntaggedBoundaryFacet(_))));
        let dup = vec![
            BoundaryFacet { nodes: vec![0, 1], tag: BoundaryTag::Dirichlet },
            BoundaryFacet { nodes: vec![1, 0], tag: BoundaryTag::Neumann },
        ];
        assert!(SimplicialMesh::new(2, vec![0., 0., 1., 0., 0., 1.], vec![0, 1, 2], dup).is_err());
    }

    #[test]
    fn locate_points() {
        let m = build_rect_mesh(&Domain::unit_square(), 0.25).unwrap();
        let (c, bary) = m.locate(&[0.3, 0.6]).unwrap();
        let mut p = [0.0; 2];
        for (k, &v) in m.cell(c).iter().enumerate() {
            p[0] += bary[k] * m.vertex(v)[0];
            p[1] += bary[k] * m.vertex(v)[1];
        }
        assert!((p[0] - 0.3).abs() < 1e-14 && (p[1] - 0.6).abs() < 1e-14);
    }
}
