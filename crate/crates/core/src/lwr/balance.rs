use super::fundamental::flux_unchecked;
use super::DensityField;

/// Trapezoid rule over equally spaced samples.
fn trapezoid(values: impl ExactSizeIterator<Item = f64>, step: f64) -> f64 {
    let n = values.len();
    let mut total = 0.0;
    for (k, v) in values.enumerate() {
        let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        total += w * v;
    }
    total * step
}

/// Vehicle conservation residual over the whole grid:
/// change in mass on `[x_min, x_max]` minus the net boundary inflow,
/// both by trapezoid quadrature on the nodes.
///
/// The flux is evaluated from the field's own environment without range
/// checks, so model output outside `[0, rho_m]` is audited as-is.
pub fn mass_balance(field: &DensityField) -> f64 {
    let grid = field.grid();
    let env = field.env();
    let (nx, nt) = (grid.nx(), grid.nt());
    let mass_at = |n: usize| trapezoid((0..nx).map(|i| field.get(i, n)), grid.dx());
    let stored = mass_at(nt - 1) - mass_at(0);
    let inflow = trapezoid(
        (0..nt).map(|n| flux_unchecked(field.get(0, n), env) - flux_unchecked(field.get(nx - 1, n), env)),
        grid.dt(),
    );
    stored - inflow
}
