use super::{Graph, ParamStore, Scalar, Var};
use crate::error::Result;

/// Outcome of comparing backward-pass gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter path and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Checks every parameter entry of `store` against central finite
/// differences of the scalar built by `f`.
///
/// `f` must be deterministic given the store. The relative error per entry is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<T, F>(f: F, store: &ParamStore<T>, epsilon: f64) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&mut Graph<T>, &ParamStore<T>) -> Result<Var>,
{
    grad_check_with(Graph::new, f, store, epsilon)
}

/// Like [`grad_check`], but the graph used for the analytic pass comes from
/// `make_graph` (used to inject faults into backward rules).
pub fn grad_check_with<T, F, G>(
    make_graph: G,
    f: F,
    store: &ParamStore<T>,
    epsilon: f64,
) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&mut Graph<T>, &ParamStore<T>) -> Result<Var>,
    G: Fn() -> Graph<T>,
{
    assert!(epsilon > 0.0, "epsilon must be positive");
    let mut graph = make_graph();
    let root = f(&mut graph, store)?;
    graph.backward(root)?;

    let mut analytic = ParamStore::new(store.seed());
    for (name, p) in store.iter() {
        analytic.insert(name, p.value.clone())?;
    }
    graph.accumulate_into(&mut analytic)?;

    let eval = |s: &ParamStore<T>| -> Result<f64> {
        let mut g = Graph::new();
        let root = f(&mut g, s)?;
        Ok(g.value(root).item().as_f64())
    };

    let mut probe = store.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        entries_checked: 0,
    };
    let names: Vec<String> = store.names().map(str::to_string).collect();
    for name in names {
        let len = store.value(&name).map_or(0, |t| t.len());
        for k in 0..len {
            let original = store.value(&name).expect("known name").data()[k];
            probe.value_mut(&name).expect("known name").data_mut()[k] =
                T::lit(original.as_f64() + epsilon);
            let plus = eval(&probe)?;
            probe.value_mut(&name).expect("known name").data_mut()[k] =
                T::lit(original.as_f64() - epsilon);
            let minus = eval(&probe)?;
            probe.value_mut(&name).expect("known name").data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.get(&name).expect("known name").grad.data()[k].as_f64();
            let err = rel_error(a, numeric);
            report.entries_checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), k));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Fault;
    use crate::Tensor64;

    fn store() -> ParamStore<f64> {
        let mut s = ParamStore::new(3);
        s.insert("a", Tensor64::vector(&[0.3, -1.2, 2.0])).unwrap();
        s.insert("b", Tensor64::from_rows(&[vec![0.5, -0.25], vec![1.5, 0.1], vec![-0.7, 0.9]]).unwrap())
            .unwrap();
        s
    }

    #[test]
    fn half_squared_norm() {
        let f = |g: &mut Graph<f64>, s: &ParamStore<f64>| {
            let a = g.param(s, "a")?;
            let sq = g.mul(a, a)?;
            let total = g.sum(sq);
            Ok(g.scale(total, 0.5))
        };
        let r = grad_check(f, &store(), 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-9, "{r:?}");
        assert_eq!(r.entries_checked, 3 + 6);
    }

    #[test]
    fn constant_function_has_zero_error() {
        let f = |g: &mut Graph<f64>, _: &ParamStore<f64>| Ok(g.leaf(Tensor64::scalar(4.0)));
        let r = grad_check(f, &store(), 1e-5).unwrap();
        assert_eq!(r.max_rel_error, 0.0);
    }

    fn composite(g: &mut Graph<f64>, s: &ParamStore<f64>) -> Result<Var> {
        let a = g.param(s, "a")?;
        let b = g.param(s, "b")?;
        let row = g.leaf(Tensor64::from_rows(&[vec![0.2, -0.4, 0.6]])?);
        let shifted = g.add_row(row, a)?;
        let ar = g.mul(row, shifted)?;
        let z = g.matmul(ar, b)?;
        let t = g.tanh(z);
        let sg = g.sigmoid(t);
        let sm = g.softmax_rows(sg);
        let ce = g.cross_entropy(z, &[Some(1)])?;
        let p = g.sum(sm);
        let q = g.mul(p, ce)?;
        let one_minus = g.affine(sg, -1.0, 1.0);
        let m = g.min(sg, one_minus)?;
        let mm = g.sum(m);
        g.add(q, mm)
    }

    #[test]
    fn composed_expression_passes() {
        let r = grad_check(composite, &store(), 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn corrupted_rule_is_caught() {
        let r = grad_check_with(|| Graph::with_fault(Fault::SigmoidGrad), composite, &store(), 1e-5).unwrap();
        assert!(r.max_rel_error > 1e-3, "{r:?}");
        assert!(r.worst.is_some());
    }
}
