use latwalk::space::{audit_partition, ball_count_check, build_net, build_partition, Metric, MetricModel};

#[test]
fn square_box_partition_and_annuli() {
    let model = MetricModel::lattice_box(&[256, 256], Metric::LInf).unwrap();
    let centers = build_net(&model, 4.0).unwrap();
    let part = build_partition(&model, &centers, 4.0).unwrap();
    let audit = audit_partition(&model, &part);
    assert_eq!(audit.violations(), 0, "{audit:?}");
    let rep = ball_count_check(&model, &part, 4.0, 4);
    // centers form the even sublattice, so an interior center sees
    // (8*2^k - 1)^2 - (4*2^k - 1)^2 others in the k-th annulus
    for &(k, count, _) in &rep.rows {
        let outer = 8 * (1usize << k) - 1;
        let inner = 4 * (1usize << k) - 1;
        assert_eq!(count, outer * outer - inner * inner);
    }
    assert!(rep.constant < 48.0);
    assert_eq!(rep.volume_bound_violations, 0);
    assert!(!rep.unbounded_growth);
}
