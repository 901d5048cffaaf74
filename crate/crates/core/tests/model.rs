use mars_core::{
    aggregate_rigid_body, apply_fault, linear_model, rank_condition, rotate_unit, wrench_map, Assembly, Cell, Fault,
    Unit, UnitGeometry, Yaw,
};
use mars_core::model::DEFAULT_PITCH;

fn grid(c: i32, r: i32) -> Assembly {
    Assembly::grid(c, r, DEFAULT_PITCH, UnitGeometry::default()).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn three_by_two_mass_properties_by_hand() {
    // com at (0.3, 0.15); |dy| = 0.15 for every unit, |dx| in {0.3, 0, 0.3}
    let body = aggregate_rigid_body(&grid(3, 2));
    assert_eq!(body.n_units, 6);
    assert!(close(body.total_mass, 6.0, 1e-12));
    let jxx = 6.0 * 0.01 + 6.0 * 0.15 * 0.15;
    let jyy = 6.0 * 0.01 + 4.0 * 0.3 * 0.3;
    let jzz = 6.0 * 0.02 + 6.0 * 0.15 * 0.15 + 4.0 * 0.3 * 0.3;
    for (got, want) in body.inertia.iter().zip([jxx, jyy, jzz]) {
        assert!(close(*got, want, 1e-12), "{got} vs {want}");
    }
    assert!(body.dropped_product.abs() < 1e-12);
}

#[test]
fn l_shape_keeps_product_of_inertia_aside() {
    let units = vec![
        Unit::healthy(1, Cell::new(0, 0)),
        Unit::healthy(2, Cell::new(1, 0)),
        Unit::healthy(3, Cell::new(0, 1)),
    ];
    let a = Assembly::new(units, DEFAULT_PITCH, UnitGeometry::default()).unwrap();
    let body = aggregate_rigid_body(&a);
    // offsets from com (0.1, 0.1): (-0.1,-0.1), (0.2,-0.1), (-0.1,0.2)
    let product: f64 = 0.01 - 0.02 - 0.02;
    assert!(close(body.dropped_product.abs(), product.abs(), 1e-12));
}

#[test]
fn wrench_map_of_single_unit() {
    let a = grid(1, 1);
    let w = wrench_map(&a);
    assert_eq!(w.n_rotors(), 4);
    let h = 0.1 / 2f64.sqrt();
    // rotor 0 at (+h, +h), spin +1
    let c = w.columns[0];
    assert!(close(c[0], 1.0, 1e-15) && close(c[1], h, 1e-15) && close(c[2], -h, 1e-15) && close(c[3], 0.05, 1e-15));
    let all = w.apply(&[5.0; 4]);
    assert!(close(all[0], 20.0, 1e-12));
    assert!(all.rows(1, 3).norm() < 1e-12);
}

#[test]
fn failed_unit_contributes_zero_columns() {
    let a = apply_fault(&grid(3, 2), &Fault::complete(3)).unwrap();
    let w = wrench_map(&a);
    for (r, c) in w.rotors.iter().zip(&w.columns) {
        assert_eq!(r.unit == 3, c.norm() == 0.0);
    }
}

#[test]
fn input_matrix_structure() {
    let lm = linear_model(&grid(3, 2));
    let b = lm.b_matrix;
    let body = aggregate_rigid_body(&grid(3, 2));
    assert!(close(b[(4, 0)], -1.0 / 6.0, 1e-15));
    for i in 0..3 {
        assert!(close(b[(5 + i, 1 + i)], 1.0 / body.inertia[i], 1e-12));
    }
    assert!(close(lm.gravity_wrench[0], 6.0 * 9.81, 1e-12));
    assert!(rank_condition(&lm));
}

#[test]
fn quarter_yaw_swaps_unit_inertia() {
    let mut g = UnitGeometry::default();
    g.unit_inertia = [0.01, 0.03, 0.04];
    let a = Assembly::grid(1, 1, DEFAULT_PITCH, g).unwrap();
    let r = rotate_unit(&a, 1, Yaw::from_quarters(1)).unwrap();
    assert_eq!(aggregate_rigid_body(&r).inertia, [0.03, 0.01, 0.04]);
}

#[test]
fn disconnected_layout_is_rejected() {
    let units = vec![Unit::healthy(1, Cell::new(0, 0)), Unit::healthy(2, Cell::new(2, 0))];
    assert!(Assembly::new(units, DEFAULT_PITCH, UnitGeometry::default()).is_err());
}

#[test]
fn efficiency_out_of_range_is_rejected() {
    let f = Fault { unit: 1, efficiencies: [1.0, 1.2, 1.0, 1.0] };
    assert!(apply_fault(&grid(2, 1), &f).is_err());
    assert!(apply_fault(&grid(2, 1), &Fault::complete(9)).is_err());
}
