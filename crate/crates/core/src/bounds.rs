//! Closed-form size and cost bounds for trees of bounded arity.
//! All arithmetic saturates at `u128::MAX`.

fn pow(base: u128, exp: u32) -> u128 {
    base.saturating_pow(exp)
}

/// Nodes in a perfect `m`-ary tree of height `l_root`: `(m^(l_root+1) − 1)/(m − 1)`.
pub fn node_count_bound(m: u64, l_root: u32) -> u128 {
    assert!(m >= 2, "arity must be at least 2");
    let m = m as u128;
    // Sum of the geometric series, which avoids overflow in the numerator.
    (0..=l_root).fold(0u128, |acc, l| acc.saturating_add(pow(m, l)))
}

/// Entries of a tree with `node_count_bound(m, l_root)` nodes, each with at
/// most `m + 1` axes of dimension at most `d_max`.
pub fn entries_upper_bound(m: u64, l_root: u32, d_max: u64) -> u128 {
    node_count_bound(m, l_root).saturating_mul(pow(d_max as u128, m as u32 + 1))
}

/// The same bound expressed through the qubit count of a perfect tree:
/// `ceil((m·N − 1)/(m − 1)) · d_max^(m+1)`.
pub fn entries_bound_for_qubits(m: u64, n_qubits: u64, d_max: u64) -> u128 {
    assert!(m >= 2, "arity must be at least 2");
    let nodes = (m as u128 * n_qubits as u128 - 1).div_ceil(m as u128 - 1);
    nodes.saturating_mul(pow(d_max as u128, m as u32 + 1))
}

/// `ceil(log_m N)`, the height of the shallowest `m`-ary tree with `N` leaves.
pub fn ceil_log(m: u64, n: u64) -> u32 {
    assert!(m >= 2, "arity must be at least 2");
    let mut h = 0;
    let mut reach = 1u128;
    while reach < n as u128 {
        reach *= m as u128;
        h += 1;
    }
    h
}

/// Cost of one gate application: `ceil(log_m N) · d_max^(m+2)`.
pub fn flops_bound(m: u64, n_qubits: u64, d_max: u64) -> u128 {
    (ceil_log(m, n_qubits) as u128).saturating_mul(pow(d_max as u128, m as u32 + 2))
}
