//! Fixed-scenario regression tests kept from debugging sessions.

use dyconn::audit::audit;
use dyconn::{Connectivity, Encoding, Overrides};

fn assert_clean(c: &Connectivity, at: &str) {
    let r = audit(c);
    assert!(r.is_empty(), "audit after {at}: {r:#?}");
}

#[test]
fn short_path_under_tiny_parameters() {
    for enc in [Encoding::Dense, Encoding::Packed] {
        let mut c = Connectivity::new(
            6,
            12,
            enc,
            Overrides {
                k: Some(2),
                h: Some(4),
                word_bits: None,
            },
        )
        .unwrap();
        for (u, v) in [(0u32, 1u32), (1, 2), (2, 3), (3, 4), (4, 5)] {
            c.insert(u, v).unwrap();
            assert_clean(&c, &format!("insert ({u},{v})"));
        }
        assert_eq!(c.connected(0, 5).unwrap(), true);
        c.delete(2, 3).unwrap();
        assert_clean(&c, "delete (2,3)");
        assert_eq!(c.connected(0, 5).unwrap(), false);
    }
}
