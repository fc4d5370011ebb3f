//! Binary STL parsing and enclosed volume.

fn vertex(b: &[u8]) -> [f64; 3] {
    let f = |k: usize| f32::from_le_bytes(b[4 * k..4 * k + 4].try_into().unwrap()) as f64;
    [f(0), f(1), f(2)]
}

/// Triangle count and divergence-theorem volume, or `None` for a malformed file.
pub fn signed_volume(bytes: &[u8]) -> Option<(usize, f64)> {
    let count = u32::from_le_bytes(bytes.get(80..84)?.try_into().ok()?) as usize;
    if bytes.len() != 84 + 50 * count {
        return None;
    }
    let mut vol = 0.0;
    for t in bytes[84..].chunks_exact(50) {
        let [a, b, c] = [vertex(&t[12..24]), vertex(&t[24..36]), vertex(&t[36..48])];
        let cross = [
            b[1] * c[2] - b[2] * c[1],
            b[2] * c[0] - b[0] * c[2],
            b[0] * c[1] - b[1] * c[0],
        ];
        vol += (a[0] * cross[0] + a[1] * cross[1] + a[2] * cross[2]) / 6.0;
    }
    Some((count, vol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(tris: &[[[f32; 3]; 3]]) -> Vec<u8> {
        let mut out = vec![0u8; 80];
        out.extend((tris.len() as u32).to_le_bytes());
        for t in tris {
            out.extend([0u8; 12]);
            for v in t {
                for c in v {
                    out.extend(c.to_le_bytes());
                }
            }
            out.extend([0u8; 2]);
        }
        out
    }

    #[test]
    fn unit_tetrahedron() {
        let (o, x, y, z) = (
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        );
        let bytes = write(&[[o, y, x], [o, x, z], [o, z, y], [x, y, z]]);
        let (n, v) = signed_volume(&bytes).unwrap();
        assert_eq!(n, 4);
        assert!((v - 1.0 / 6.0).abs() < 1e-12);
        assert!(signed_volume(&bytes[..bytes.len() - 1]).is_none());
    }
}
