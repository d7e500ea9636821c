use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::{Tape, Var};

use super::params::BoundParams;

/// One gated recurrent unit, `prefix.{wx,uzr,un,b}` plus an optional
/// context input matrix `prefix.wc`.
#[derive(Debug, Clone, Copy)]
pub struct Gru {
    wx: Var,
    wc: Option<Var>,
    uzr: Var,
    un: Var,
    b: Var,
    hidden: usize,
}

impl Gru {
    pub fn bind(w: &BoundParams<'_>, prefix: &str) -> Result<Self> {
        let wc_name = format!("{prefix}.wc");
        Ok(Gru {
            wx: w.get(&format!("{prefix}.wx"))?,
            wc: if w.has(&wc_name) {
                Some(w.get(&wc_name)?)
            } else {
                None
            },
            uzr: w.get(&format!("{prefix}.uzr"))?,
            un: w.get(&format!("{prefix}.un"))?,
            b: w.get(&format!("{prefix}.b"))?,
            hidden: w.config().hidden_dim,
        })
    }

    /// `z = σ(x Wz + h Uz + bz)`, `r = σ(x Wr + h Ur + br)`,
    /// `n = tanh(x Wn + (r ⊙ h) Un + bn)`, `h' = z ⊙ h + (1 - z) ⊙ n`.
    ///
    /// `ctx` is added through `wc` when the cell has one.
    pub fn step<T: Scalar>(&self, tape: &mut Tape<T>, x: Var, ctx: Option<Var>, h: Var) -> Result<Var> {
        let d = self.hidden;
        let mut xw = tape.matmul(x, self.wx)?;
        if let (Some(wc), Some(c)) = (self.wc, ctx) {
            let cw = tape.matmul(c, wc)?;
            xw = tape.add(xw, cw)?;
        }
        let xw = tape.add(xw, self.b)?;
        let hzr = tape.matmul(h, self.uzr)?;
        let xzr = tape.slice(xw, 0, 2 * d)?;
        let gates = tape.add(xzr, hzr)?;
        let gates = tape.sigmoid(gates);
        let z = tape.slice(gates, 0, d)?;
        let r = tape.slice(gates, d, 2 * d)?;
        let rh = tape.mul(r, h)?;
        let rhu = tape.matmul(rh, self.un)?;
        let xn = tape.slice(xw, 2 * d, 3 * d)?;
        let n = tape.add(xn, rhu)?;
        let n = tape.tanh(n);
        let diff = tape.sub(h, n)?;
        let zd = tape.mul(z, diff)?;
        tape.add(n, zd)
    }
}
