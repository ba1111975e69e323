/// Unnormalized log density over a flat parameter vector, in physical
/// coordinates. Implementations may keep scratch buffers, hence `&mut self`.
pub trait LogTarget {
    fn dim(&self) -> usize;

    fn log_density(&mut self, theta: &[f64]) -> f64;

    /// Value and gradient. Returns -∞ (gradient unspecified) outside the
    /// support.
    fn log_density_and_grad(&mut self, theta: &[f64], grad: &mut [f64]) -> f64;
}

impl<T: LogTarget + ?Sized> LogTarget for &mut T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density(&mut self, theta: &[f64]) -> f64 {
        (**self).log_density(theta)
    }

    fn log_density_and_grad(&mut self, theta: &[f64], grad: &mut [f64]) -> f64 {
        (**self).log_density_and_grad(theta, grad)
    }
}
