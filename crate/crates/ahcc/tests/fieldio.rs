use std::fs;

use ahcc::fieldio::{read_field, read_header, write_field, MAGIC, VERSION};
use ahcc::CliError;
use ahcc_core::{FdOrder, FieldGrid, NodeClass, OneFormField, Repr, ScalarField, SymTensor2Field};
use proptest::prelude::*;

fn grid(points: usize) -> FieldGrid {
    FieldGrid::build(3, points, 0.9, FdOrder::Fourth).unwrap()
}

#[test]
fn header_layout_is_fixed() {
    let g = grid(9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.ahcf");
    let f = ScalarField::from_fn(&g, Repr::Physical, |x, out| out[0] = x[0]);
    write_field(&path, &g, &f).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], &MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), VERSION);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 9);
    assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 0.9);
    assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 0);
    assert_eq!(bytes[28], 0);
    assert_eq!(bytes.len(), 29 + 8 * 9 * 9 * 9);
    // row-major: the last axis varies fastest
    let value = |node: usize| f64::from_le_bytes(bytes[29 + 8 * node..37 + 8 * node].try_into().unwrap());
    let centre = g.node_index(&[4, 4, 4]);
    assert_eq!(value(centre + 1), 0.0);
    assert!(value(centre + 81) > 0.0);
    let h = read_header(&path).unwrap();
    assert_eq!((h.n, h.points, h.rank, h.repr), (3, 9, 0, Repr::Physical));
}

#[test]
fn exterior_nodes_are_stored_as_zeros() {
    let g = grid(9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.ahcf");
    let u = SymTensor2Field::from_fn(&g, Repr::Rescaled, |_, out| out.fill(1.0));
    write_field(&path, &g, &u).unwrap();
    let back: SymTensor2Field = read_field(&path, &g, Repr::Rescaled).unwrap();
    for p in 0..g.node_count() {
        let expected = if g.class(p) == NodeClass::Exterior { 0.0 } else { u.at(p)[0] };
        assert!(back.at(p).iter().all(|v| *v == expected));
    }
}

#[test]
fn mismatches_are_schema_errors() {
    let g = grid(9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.ahcf");
    write_field(&path, &g, &OneFormField::zeros(&g, Repr::Rescaled)).unwrap();

    let is_schema = |r: Result<OneFormField, CliError>| matches!(r, Err(CliError::Schema(_)));
    assert!(is_schema(read_field(&path, &grid(11), Repr::Rescaled)));
    assert!(is_schema(read_field(&path, &g, Repr::Physical)));
    assert!(matches!(read_field::<ahcc_core::field::Sym2>(&path, &g, Repr::Rescaled), Err(CliError::Schema(_))));

    let mut bytes = fs::read(&path).unwrap();
    bytes.pop();
    fs::write(&path, &bytes).unwrap();
    assert!(is_schema(read_field(&path, &g, Repr::Rescaled)));
    bytes[0] = b'X';
    fs::write(&path, &bytes).unwrap();
    assert!(is_schema(read_field(&path, &g, Repr::Rescaled)));

    let missing = read_field::<ahcc_core::field::OneForm>(&dir.path().join("none"), &g, Repr::Rescaled);
    assert!(matches!(missing, Err(CliError::Io { .. })));
    assert_eq!(missing.unwrap_err().exit_code(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn interior_values_round_trip_bitwise(seed in any::<u64>()) {
        let g = grid(9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.ahcf");
        let mut state = seed;
        let u = SymTensor2Field::from_fn(&g, Repr::Physical, |_, out| {
            for v in out.iter_mut() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *v = f64::from_bits(state >> 12 | 0x3ff0_0000_0000_0000) - 1.5;
            }
        });
        write_field(&path, &g, &u).unwrap();
        let back: SymTensor2Field = read_field(&path, &g, Repr::Physical).unwrap();
        for p in 0..g.node_count() {
            if g.class(p) != NodeClass::Exterior {
                for (a, b) in u.at(p).iter().zip(back.at(p)) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }
}
