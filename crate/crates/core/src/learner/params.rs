/// Dense parameter count of Llama-2-7B, the usual reference for compression.
pub const LLAMA2_7B_PARAMS: u64 = 6_738_000_000;

/// `Σ rows × gpr × 2^bits` over the given `(rows, cols)` layer shapes.
pub fn count_trainable_params(layer_shapes: &[(usize, usize)], gpr: usize, bits: u8) -> u64 {
    let k = 1u64 << bits;
    layer_shapes.iter().map(|&(rows, _)| rows as u64 * gpr as u64 * k).sum()
}

/// Linear layers of Llama-2-7B as `(rows, cols)` = (output, input) features:
/// per block q, k, v, o (4096×4096), gate and up (11008×4096) and down
/// (4096×11008), over 32 blocks.
pub fn llama2_7b_shapes() -> Vec<(usize, usize)> {
    let block = [
        (4096, 4096),
        (4096, 4096),
        (4096, 4096),
        (4096, 4096),
        (11008, 4096),
        (11008, 4096),
        (4096, 11008),
    ];
    (0..32).flat_map(|_| block).collect()
}

/// Dense-over-trainable ratio.
pub fn compression_ratio(dense_params: u64, trainable: u64) -> f64 {
    dense_params as f64 / trainable as f64
}
