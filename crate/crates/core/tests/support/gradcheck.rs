// Central finite-difference oracle for network gradients. Only the public
// forward/loss path is used, so it stays independent of the BPTT code.

use stocktweet::net::{DropoutMasks, Gradients, LstmParams, Network, Sample};
use stocktweet::textprep::PAD_INDEX;

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for the relative error. Central differences at
/// `FD_STEP` carry round-off of order 1e-11 on an O(1) loss, so entries with
/// |gradient| below this floor are compared on an absolute 1e-10 scale.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Default)]
pub struct CheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: String,
}

impl CheckReport {
    fn record(&mut self, name: String, analytic: f64, numeric: f64) {
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        self.checked += 1;
        if rel > self.max_rel_error {
            self.max_rel_error = rel;
            self.worst = format!("{name}: analytic {analytic:e}, numeric {numeric:e}");
        }
    }
}

fn numeric(
    net: &mut Network,
    batch: &[Sample<'_>],
    masks: Option<&[DropoutMasks]>,
    get: impl Fn(&mut Network) -> &mut f64,
) -> f64 {
    let orig = *get(net);
    *get(net) = orig + FD_STEP;
    let plus = net.loss(batch, masks).unwrap();
    *get(net) = orig - FD_STEP;
    let minus = net.loss(batch, masks).unwrap();
    *get(net) = orig;
    (plus - minus) / (2.0 * FD_STEP)
}

fn lstm(n: &mut Network, layer: usize, dir: usize) -> &mut LstmParams {
    if dir == 0 {
        &mut n.layers[layer].forward
    } else {
        n.layers[layer].backward.as_mut().unwrap()
    }
}

/// Compare every trainable parameter's analytic gradient against central
/// differences of the mean batch loss.
pub fn check(net: &Network, batch: &[Sample<'_>], masks: Option<&[DropoutMasks]>) -> CheckReport {
    let (_, grads): (f64, Gradients) = net.loss_and_gradients(batch, masks).unwrap();
    let mut net = net.clone();
    let mut report = CheckReport::default();

    for l in 0..net.layers.len() {
        for dir in 0..2 {
            let present = if dir == 0 {
                true
            } else {
                net.layers[l].backward.is_some()
            };
            if !present {
                continue;
            }
            let gp = if dir == 0 {
                &grads.layers[l].forward
            } else {
                grads.layers[l].backward.as_ref().unwrap()
            };
            let n_w = gp.w.len();
            for k in 0..n_w {
                let num = numeric(&mut net, batch, masks, |n| &mut lstm(n, l, dir).w[k]);
                report.record(format!("layer{l}.dir{dir}.w[{k}]"), gp.w[k], num);
            }
            for k in 0..gp.b.len() {
                let num = numeric(&mut net, batch, masks, |n| &mut lstm(n, l, dir).b[k]);
                report.record(format!("layer{l}.dir{dir}.b[{k}]"), gp.b[k], num);
            }
        }
    }
    for k in 0..net.dense.w.len() {
        let num = numeric(&mut net, batch, masks, |n| &mut n.dense.w[k]);
        report.record(format!("dense.w[{k}]"), grads.dense.w[k], num);
    }
    let num = numeric(&mut net, batch, masks, |n| &mut n.dense.b);
    report.record("dense.b".into(), grads.dense.b, num);

    let dim = net.embedding.dim();
    for row in 1..net.embedding.vocab_size() as u32 {
        debug_assert_ne!(row, PAD_INDEX);
        for k in 0..dim {
            let num = numeric(&mut net, batch, masks, |n| &mut n.embedding.row_mut(row)[k]);
            let ana = grads.embedding.get(&row).map_or(0.0, |g| g[k]);
            report.record(format!("embedding[{row}][{k}]"), ana, num);
        }
    }
    assert!(!grads.embedding.contains_key(&PAD_INDEX));
    report
}
