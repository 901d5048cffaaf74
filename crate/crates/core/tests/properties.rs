use mars_core::config::{parse_str, AssemblyDoc, Params};
use mars_core::model::DEFAULT_PITCH;
use mars_core::{
    aggregate_rigid_body, apply_fault, controllability_margin, rotate_unit, wrench_map, Assembly, Cell, Fault, Unit,
    UnitGeometry, Yaw,
};
use proptest::prelude::*;

/// Grows a polyomino from the origin: each step picks a free neighbor of
/// an existing cell.
fn polyomino(picks: &[(usize, usize)]) -> Vec<Cell> {
    let mut cells = vec![Cell::new(0, 0)];
    for (i, d) in picks {
        let base = cells[i % cells.len()];
        let n = base.neighbors()[d % 4];
        if !cells.contains(&n) {
            cells.push(n);
        }
    }
    cells
}

fn assembly_from(cells: &[Cell], etas: &[[f64; 4]], yaws: &[u8]) -> Assembly {
    let units = cells
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut u = Unit::healthy(i as u32 + 1, *c).with_efficiencies(etas[i % etas.len()]);
            u.yaw = Yaw::from_quarters(i32::from(yaws[i % yaws.len()]));
            u
        })
        .collect();
    Assembly::new(units, DEFAULT_PITCH, UnitGeometry::default()).unwrap()
}

fn eta() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64])
}

fn assembly() -> impl Strategy<Value = Assembly> {
    (
        prop::collection::vec((0usize..8, 0usize..4), 1..6),
        prop::collection::vec(eta(), 1..4),
        prop::collection::vec(0u8..4, 1..4),
    )
        .prop_map(|(picks, etas, yaws)| assembly_from(&polyomino(&picks), &etas, &yaws))
}

fn cm(a: &Assembly) -> f64 {
    controllability_margin(a).unwrap().cm
}

fn shifted(a: &Assembly, dc: i32, dr: i32) -> Assembly {
    let units = a
        .units()
        .iter()
        .map(|u| {
            let mut v = u.clone();
            v.cell = u.cell.offset(dc, dr);
            v
        })
        .collect();
    a.with_units(units).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unit_order_does_not_matter(a in assembly(), rot in 0usize..6) {
        let mut units = a.units().to_vec();
        let len = units.len();
        units.rotate_left(rot % len);
        let b = Assembly::new(units, a.pitch(), a.geometry().clone()).unwrap();
        let (ra, rb) = (aggregate_rigid_body(&a), aggregate_rigid_body(&b));
        for i in 0..3 {
            prop_assert!((ra.inertia[i] - rb.inertia[i]).abs() < 1e-12);
            prop_assert!((ra.com[i] - rb.com[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn translation_leaves_wrench_map_and_margin_unchanged(a in assembly(), dc in -5i32..5, dr in -5i32..5) {
        let b = shifted(&a, dc, dr);
        let (wa, wb) = (wrench_map(&a), wrench_map(&b));
        for (x, y) in wa.columns.iter().zip(&wb.columns) {
            prop_assert!((x - y).norm() < 1e-12);
        }
        prop_assert!((cm(&a) - cm(&b)).abs() < 1e-9);
    }

    #[test]
    fn restoring_efficiencies_restores_the_map(a in assembly(), pick in 0usize..6, e in eta()) {
        let id = a.units()[pick % a.len()].id;
        let before = a.unit(id).unwrap().efficiencies();
        let faulty = apply_fault(&a, &Fault { unit: id, efficiencies: e }).unwrap();
        let back = apply_fault(&faulty, &Fault { unit: id, efficiencies: before }).unwrap();
        prop_assert_eq!(wrench_map(&back), wrench_map(&a));
    }

    #[test]
    fn losing_efficiency_never_raises_the_margin(a in assembly(), pick in 0usize..6, rotor in 0usize..4, f in 0.0..1.0f64) {
        let u = &a.units()[pick % a.len()];
        let mut e = u.efficiencies();
        e[rotor] *= f;
        let weaker = apply_fault(&a, &Fault { unit: u.id, efficiencies: e }).unwrap();
        prop_assert!(cm(&weaker) <= cm(&a) + 1e-9);
    }

    #[test]
    fn more_thrust_widens_a_positive_margin(a in assembly(), s in 1.05..3.0f64) {
        let base = cm(&a);
        prop_assume!(base > 1e-6);
        let mut g = a.geometry().clone();
        g.thrust_max_per_rotor *= s;
        let stronger = Assembly::new(a.units().to_vec(), a.pitch(), g).unwrap();
        prop_assert!(cm(&stronger) > base);
    }

    #[test]
    fn verdict_matches_sign(a in assembly()) {
        let r = controllability_margin(&a).unwrap();
        prop_assert_eq!(r.controllable, r.cm > 0.0 && r.rank_ok);
    }

    #[test]
    fn half_turn_of_a_healthy_unit_is_invisible(picks in prop::collection::vec((0usize..8, 0usize..4), 1..6), pick in 0usize..6) {
        let a = assembly_from(&polyomino(&picks), &[[1.0; 4]], &[0]);
        let id = a.units()[pick % a.len()].id;
        let b = rotate_unit(&a, id, Yaw::from_quarters(2)).unwrap();
        prop_assert!((cm(&a) - cm(&b)).abs() < 1e-9);
    }

    #[test]
    fn assembly_document_round_trips(a in assembly()) {
        let doc = AssemblyDoc::from_assembly(&a);
        let text = serde_json::to_string(&doc).unwrap();
        let back: AssemblyDoc = parse_str(&text).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(back.build(&Params::bundled()).unwrap(), a);
    }
}
