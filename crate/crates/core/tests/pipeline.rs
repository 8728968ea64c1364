use mfd_core::analyze::{convergence_study, error_norms, operators, ErrorMeasure};
use mfd_core::assembly::{discretize, ProblemKind};
use mfd_core::io::{vtk_string, MeshFile};
use mfd_core::presets::{preset, PRESET_NAMES};
use mfd_core::solve::{solve, SolveOptions};

#[test]
fn every_preset_solves_on_a_coarse_mesh() {
    for name in PRESET_NAMES {
        let p = preset(name, None).unwrap();
        let mesh = p.family.build(2).unwrap();
        let d = discretize(&mesh, &p.spec).unwrap();
        let r = solve(&d.system, &SolveOptions::default()).unwrap();
        assert!(r.solution.values.iter().all(|v| v.is_finite()), "{name}");
        let expected = match p.spec.kind {
            ProblemKind::ScalarGrad => mesh.primal.num_vertices(),
            ProblemKind::VectorCurl => mesh.num_edges(),
        };
        assert_eq!(r.solution.values.len(), expected, "{name}");
        if let (Some(lo), Some(hi)) = (p.lower_bound, p.upper_bound) {
            assert!(
                r.solution.values.iter().all(|&v| v >= lo - 1e-10 && v <= hi + 1e-10),
                "{name}"
            );
        }
    }
}

#[test]
fn errors_shrink_under_refinement() {
    let p = preset("hex-scalar", None).unwrap();
    let exact = p.exact.clone().unwrap();
    let errs: Vec<f64> = (1..=4)
        .map(|level| {
            let mesh = p.family.build(level).unwrap();
            let d = discretize(&mesh, &p.spec).unwrap();
            let r = solve(&d.system, &SolveOptions::default()).unwrap();
            error_norms(&mesh, &operators(&mesh), &exact, &r.solution)
                .unwrap()
                .energy
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");

    let study = convergence_study(
        "hex-scalar",
        &[1, 2, 3, 4],
        &[1.0],
        &SolveOptions::default(),
        ErrorMeasure::Lumped,
        1,
    )
    .unwrap();
    let csv = study.to_csv();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn mesh_and_field_serialise() {
    let p = preset("hex-vector", None).unwrap();
    let mesh = p.family.build(1).unwrap();
    let json = serde_json::to_string(&MeshFile::from_mesh(&mesh)).unwrap();
    let back: MeshFile = serde_json::from_str(&json).unwrap();
    let again = back.into_mesh().unwrap();
    assert_eq!(again.primal.vertices, mesh.primal.vertices);
    assert_eq!(again.num_edges(), mesh.num_edges());

    let r = solve(&discretize(&mesh, &p.spec).unwrap().system, &SolveOptions::default()).unwrap();
    let vtk = vtk_string(&mesh, Some(&r.solution), "u").unwrap();
    assert!(vtk.starts_with("# vtk DataFile"));
}
