use std::collections::HashMap;

use super::Mesh;

pub(super) fn uniform_refine(mesh: &Mesh) -> Mesh {
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices().to_vec();
    vertices.reserve(mesh.num_facets());
    let mut child_tags: HashMap<[usize; 2], i32> = HashMap::new();
    for (f, facet) in mesh.facets().iter().enumerate() {
        let [a, b] = facet.vertices;
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        if facet.is_boundary() {
            let m = nv + f;
            child_tags.insert([a.min(m), a.max(m)], facet.tag);
            child_tags.insert([b.min(m), b.max(m)], facet.tag);
        }
    }
    let mut cells = Vec::with_capacity(4 * mesh.num_cells());
    for (c, cell) in mesh.cells().iter().enumerate() {
        let [f0, f1, f2] = mesh.cell_facets(c);
        // m_i is the midpoint of the edge opposite vertex i
        let (m0, m1, m2) = (nv + f0, nv + f1, nv + f2);
        let [v0, v1, v2] = *cell;
        cells.push([v0, m2, m1]);
        cells.push([m2, v1, m0]);
        cells.push([m1, m0, v2]);
        cells.push([m0, m1, m2]);
    }
    Mesh::from_cells(vertices, cells, |k| {
        child_tags.get(&k).copied().unwrap_or(0)
    })
    .expect("refinement of a valid mesh is valid")
}
