//! Legacy ASCII VTK output of discrete fields.

use std::io::Write;

use crate::mesh::{ActiveSlabMesh, BackgroundMesh, CellKind};
use crate::space::FieldState;

/// Writes the active cells with vertex values of velocity and pressure.
/// Cell data `kind` is 1 for ghost, 2 for interior and 3 for cut cells.
pub fn write_fields<W: Write>(
    out: &mut W,
    mesh: &BackgroundMesh,
    slab: &ActiveSlabMesh,
    state: &FieldState,
) -> std::io::Result<()> {
    let nv = mesh.vertices.len();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "cutstokes t={}", slab.time)?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {nv} double")?;
    for p in &mesh.vertices {
        writeln!(out, "{} {} 0", p[0], p[1])?;
    }
    let cells = &slab.cells_delta;
    writeln!(out, "CELLS {} {}", cells.len(), 4 * cells.len())?;
    for &c in cells {
        let [a, b, d] = mesh.cells[c];
        writeln!(out, "3 {a} {b} {d}")?;
    }
    writeln!(out, "CELL_TYPES {}", cells.len())?;
    for _ in cells {
        writeln!(out, "5")?;
    }
    writeln!(out, "CELL_DATA {}", cells.len())?;
    writeln!(out, "SCALARS kind int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for &c in cells {
        let k = match slab.kinds[c] {
            CellKind::Outside => 0,
            CellKind::Ghost => 1,
            CellKind::Interior => 2,
            CellKind::Cut => 3,
        };
        writeln!(out, "{k}")?;
    }
    writeln!(out, "POINT_DATA {nv}")?;
    writeln!(out, "VECTORS velocity double")?;
    for v in 0..nv {
        writeln!(out, "{:.12e} {:.12e} 0", state.u[0][v], state.u[1][v])?;
    }
    writeln!(out, "SCALARS pressure double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in 0..nv {
        writeln!(out, "{:.12e}", state.p[v])?;
    }
    Ok(())
}
