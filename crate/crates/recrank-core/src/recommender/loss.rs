//! Ranking and contrastive losses with analytic gradients.

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// BPR loss for one (user, positive, negative) triple:
/// -ln sigma(x_u . x_i - x_u . x_j).
///
/// Returns (loss, grad_user, grad_pos, grad_neg).
pub fn bpr_loss_and_grad(
    user: &[f64],
    pos: &[f64],
    neg: &[f64],
) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
    let margin: f64 = user
        .iter()
        .zip(pos.iter().zip(neg))
        .map(|(u, (i, j))| u * (i - j))
        .sum();
    let loss = {
        // -ln sigma(m) computed stably
        if margin >= 0.0 {
            (1.0 + (-margin).exp()).ln()
        } else {
            -margin + (1.0 + margin.exp()).ln()
        }
    };
    // d(-ln sigma(m))/dm = sigma(m) - 1
    let coeff = sigmoid(margin) - 1.0;
    let gu: Vec<f64> = pos
        .iter()
        .zip(neg)
        .map(|(i, j)| coeff * (i - j))
        .collect();
    let gi: Vec<f64> = user.iter().map(|u| coeff * u).collect();
    let gj: Vec<f64> = user.iter().map(|u| -coeff * u).collect();
    (loss, gu, gi, gj)
}

fn l2_normalize(v: &[f64]) -> (Vec<f64>, f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    (v.iter().map(|x| x / norm).collect(), norm)
}

/// Backpropagate a gradient through z = x / ||x||.
fn grad_through_normalize(z: &[f64], norm: f64, gz: &[f64]) -> Vec<f64> {
    let zg: f64 = z.iter().zip(gz).map(|(a, b)| a * b).sum();
    z.iter()
        .zip(gz)
        .map(|(zi, gi)| (gi - zi * zg) / norm)
        .collect()
}

/// InfoNCE over a batch: anchors[i] is pulled toward positives[i] against
/// all other positives, with cosine similarity at temperature `tau`.
///
/// loss = -(1/B) sum_i ln( exp(cos(a_i, b_i)/tau) / sum_j exp(cos(a_i, b_j)/tau) )
///
/// Returns (loss, grads wrt anchors, grads wrt positives).
pub fn infonce_loss_and_grad(
    anchors: &[Vec<f64>],
    positives: &[Vec<f64>],
    tau: f64,
) -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    assert_eq!(anchors.len(), positives.len());
    assert!(tau > 0.0);
    let b = anchors.len();
    let dim = anchors[0].len();
    let norm_a: Vec<(Vec<f64>, f64)> = anchors.iter().map(|v| l2_normalize(v)).collect();
    let norm_b: Vec<(Vec<f64>, f64)> = positives.iter().map(|v| l2_normalize(v)).collect();

    let mut loss = 0.0;
    let mut gz_a = vec![vec![0.0; dim]; b];
    let mut gz_b = vec![vec![0.0; dim]; b];
    for i in 0..b {
        let logits: Vec<f64> = (0..b)
            .map(|j| {
                norm_a[i]
                    .0
                    .iter()
                    .zip(&norm_b[j].0)
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    / tau
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        loss += -(logits[i] - max - z.ln());
        for j in 0..b {
            // dL_i/dlogit_ij, averaged over the batch below
            let p = exp[j] / z;
            let dl = (p - if i == j { 1.0 } else { 0.0 }) / b as f64;
            for c in 0..dim {
                gz_a[i][c] += dl * norm_b[j].0[c] / tau;
                gz_b[j][c] += dl * norm_a[i].0[c] / tau;
            }
        }
    }
    loss /= b as f64;

    let ga: Vec<Vec<f64>> = (0..b)
        .map(|i| grad_through_normalize(&norm_a[i].0, norm_a[i].1, &gz_a[i]))
        .collect();
    let gb: Vec<Vec<f64>> = (0..b)
        .map(|j| grad_through_normalize(&norm_b[j].0, norm_b[j].1, &gz_b[j]))
        .collect();
    (loss, ga, gb)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FD_EPS: f64 = 1e-6;
    const REL_TOL: f64 = 1e-4;

    fn assert_close_rel(analytic: f64, numeric: f64) {
        let scale = analytic.abs().max(numeric.abs()).max(1e-8);
        assert!(
            (analytic - numeric).abs() / scale < REL_TOL,
            "analytic {analytic} vs numeric {numeric}"
        );
    }

    #[test]
    fn bpr_gradient_matches_central_differences() {
        let user = vec![0.3, -0.7, 0.2];
        let pos = vec![0.5, 0.1, -0.4];
        let neg = vec![-0.2, 0.6, 0.3];
        let (_, gu, gi, gj) = bpr_loss_and_grad(&user, &pos, &neg);
        for c in 0..3 {
            let mut up = user.clone();
            let mut dn = user.clone();
            up[c] += FD_EPS;
            dn[c] -= FD_EPS;
            let fd = (bpr_loss_and_grad(&up, &pos, &neg).0
                - bpr_loss_and_grad(&dn, &pos, &neg).0)
                / (2.0 * FD_EPS);
            assert_close_rel(gu[c], fd);

            let mut up = pos.clone();
            let mut dn = pos.clone();
            up[c] += FD_EPS;
            dn[c] -= FD_EPS;
            let fd = (bpr_loss_and_grad(&user, &up, &neg).0
                - bpr_loss_and_grad(&user, &dn, &neg).0)
                / (2.0 * FD_EPS);
            assert_close_rel(gi[c], fd);

            let mut up = neg.clone();
            let mut dn = neg.clone();
            up[c] += FD_EPS;
            dn[c] -= FD_EPS;
            let fd = (bpr_loss_and_grad(&user, &pos, &up).0
                - bpr_loss_and_grad(&user, &pos, &dn).0)
                / (2.0 * FD_EPS);
            assert_close_rel(gj[c], fd);
        }
    }

    #[test]
    fn infonce_gradient_matches_central_differences() {
        let anchors = vec![
            vec![0.4, 0.2, -0.1],
            vec![-0.3, 0.5, 0.2],
            vec![0.1, -0.6, 0.4],
        ];
        let positives = vec![
            vec![0.5, 0.1, -0.2],
            vec![-0.2, 0.4, 0.3],
            vec![0.2, -0.5, 0.5],
        ];
        let tau = 0.2;
        let (_, ga, gb) = infonce_loss_and_grad(&anchors, &positives, tau);
        for i in 0..3 {
            for c in 0..3 {
                let mut up = anchors.clone();
                let mut dn = anchors.clone();
                up[i][c] += FD_EPS;
                dn[i][c] -= FD_EPS;
                let fd = (infonce_loss_and_grad(&up, &positives, tau).0
                    - infonce_loss_and_grad(&dn, &positives, tau).0)
                    / (2.0 * FD_EPS);
                assert_close_rel(ga[i][c], fd);

                let mut up = positives.clone();
                let mut dn = positives.clone();
                up[i][c] += FD_EPS;
                dn[i][c] -= FD_EPS;
                let fd = (infonce_loss_and_grad(&anchors, &up, tau).0
                    - infonce_loss_and_grad(&anchors, &dn, tau).0)
                    / (2.0 * FD_EPS);
                assert_close_rel(gb[i][c], fd);
            }
        }
    }

    #[test]
    fn infonce_closed_form_on_orthogonal_batch() {
        // contrast view equals final view, all cross pairs orthogonal:
        // loss = -ln( e^{1/tau} / (e^{1/tau} + (B-1) e^0) )
        let tau = 0.25;
        let b = 4;
        let views: Vec<Vec<f64>> = (0..b)
            .map(|i| {
                let mut v = vec![0.0; b];
                v[i] = 2.0; // any norm; cosine handles scaling
                v
            })
            .collect();
        let (loss, _, _) = infonce_loss_and_grad(&views, &views, tau);
        let expected = -((1.0f64 / tau).exp() / ((1.0f64 / tau).exp() + (b as f64 - 1.0))).ln();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
    }
}
