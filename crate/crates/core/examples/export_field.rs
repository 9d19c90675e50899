//! Write a solved field as CSV and in the binary table format, then read it back.
use fracfreq::field::{
    field_csv, read_afld, solve_linear, write_afld, BoundaryDatum, HalfDiskGrid,
};
use fracfreq::sphere::AngularMesh;
use fracfreq::ProblemParams;

fn main() -> fracfreq::Result<()> {
    let params = ProblemParams::new(3, 0.5, 0.0)?;
    let mesh = AngularMesh::graded(48, 3.0)?;
    let grid = HalfDiskGrid::new(1.0, 1e-4, 32, mesh.clone())?;
    let g = BoundaryDatum::new(0, mesh.sample(|phi| 1.0 + phi.cos()))?;
    let (field, _) = solve_linear(params, &grid, &g, None)?;
    let dir = std::env::temp_dir().join("fracfreq-export");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("field.csv"), field_csv(&field))?;
    let mut bytes = Vec::new();
    write_afld(&field.values, &mut bytes)?;
    std::fs::write(dir.join("field.afld"), &bytes)?;
    let back = read_afld(std::fs::File::open(dir.join("field.afld"))?)?;
    assert_eq!(back, field.values);
    println!(
        "wrote {} rings x {} nodes to {}",
        back.len(),
        back[0].len(),
        dir.display()
    );
    Ok(())
}
