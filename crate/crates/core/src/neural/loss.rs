pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross entropy on a logit, in the stable form
/// `max(x, 0) - x*y + ln(1 + exp(-|x|))`. Returns (loss, d loss / d logit).
pub fn bce_with_logits(logit: f64, label: bool) -> (f64, f64) {
    let y = if label { 1.0 } else { 0.0 };
    let loss = logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p();
    (loss, sigmoid(logit) - y)
}
