mod common;

use common::{mine, open, rng, split_all};
use rand::Rng;
use securelr::bits::PackedBits;
use securelr::engine::test_seed;
use securelr::{run_pair, Error, Ring, ShareMatrix};

#[test]
fn exhaustive_products_mod_16() {
    let ring = Ring::<u8>::new(4).unwrap();
    let (xs, ys): (Vec<u8>, Vec<u8>) = (0..16u8).flat_map(|x| (0..16u8).map(move |y| (x, y))).unzip();
    let xsh = split_all(&xs, &ring, 1);
    let ysh = split_all(&ys, &ring, 2);
    let (a, b) = run_pair(ring, test_seed(1), |s| {
        let z = s.batch_mul(mine(s, &xsh), mine(s, &ysh))?;
        Ok((z, s.transcript().rounds))
    })
    .unwrap();
    let z = open(&a.0, &b.0, &ring);
    for i in 0..256 {
        assert_eq!(z[i], (xs[i] * ys[i]) % 16, "{} * {}", xs[i], ys[i]);
    }
    assert_eq!(a.1, 1);
}

#[test]
fn single_products_open_correctly() {
    let ring = Ring::<u8>::new(4).unwrap();
    let mut r = rng(3);
    let pairs: Vec<(u8, u8)> = (0..40).map(|_| (r.gen_range(0..16), r.gen_range(0..16))).collect();
    let xs: Vec<u8> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<u8> = pairs.iter().map(|p| p.1).collect();
    let xsh = split_all(&xs, &ring, 4);
    let ysh = split_all(&ys, &ring, 5);
    let (a, b) = run_pair(ring, test_seed(2), |s| {
        let (x, y) = (mine(s, &xsh), mine(s, &ysh));
        let z = (0..x.len()).map(|i| s.mul(x[i], y[i])).collect::<securelr::Result<Vec<_>>>()?;
        Ok((z, s.transcript().rounds))
    })
    .unwrap();
    for (i, z) in open(&a.0, &b.0, &ring).into_iter().enumerate() {
        assert_eq!(z, (xs[i] * ys[i]) % 16);
    }
    assert_eq!(a.1, 40);
}

#[test]
fn zero_annihilates() {
    let ring = Ring::<u64>::word();
    let ys: Vec<u64> = (0..50).map(|_| rng(6).gen()).collect();
    let xsh = split_all(&vec![0u64; 50], &ring, 7);
    let ysh = split_all(&ys, &ring, 8);
    let (a, b) = run_pair(ring, test_seed(3), |s| s.batch_mul(mine(s, &xsh), mine(s, &ysh))).unwrap();
    assert!(open(&a, &b, &ring).iter().all(|&z| z == 0));
}

#[test]
fn random_full_width_products() {
    let ring = Ring::<u64>::word();
    let mut r = rng(9);
    let xs: Vec<u64> = (0..10_000).map(|_| r.gen()).collect();
    let ys: Vec<u64> = (0..10_000).map(|_| r.gen()).collect();
    let xsh = split_all(&xs, &ring, 10);
    let ysh = split_all(&ys, &ring, 11);
    let (a, b) = run_pair(ring, test_seed(4), |s| s.batch_mul(mine(s, &xsh), mine(s, &ysh))).unwrap();
    let z = open(&a, &b, &ring);
    for i in 0..xs.len() {
        assert_eq!(z[i], xs[i].wrapping_mul(ys[i]));
    }
}

#[test]
fn matmul_examples() {
    let ring = Ring::<u8>::word();
    let ysecret: Vec<u8> = vec![17, 200, 3, 99];
    let ident = split_all(&[1u8, 0, 0, 1], &ring, 12);
    let ysh = split_all(&ysecret, &ring, 13);
    let row = split_all(&[1u8, 2], &ring, 14);
    let col = split_all(&[4u8, 5], &ring, 15);
    let (a, b) = run_pair(ring, test_seed(5), |s| {
        let role = s.role();
        let i = ShareMatrix::new(role, 2, 2, mine(s, &ident).clone())?;
        let y = ShareMatrix::new(role, 2, 2, mine(s, &ysh).clone())?;
        let iy = s.matmul(&i, &y)?;
        let r = ShareMatrix::new(role, 1, 2, mine(s, &row).clone())?;
        let c = ShareMatrix::new(role, 2, 1, mine(s, &col).clone())?;
        let rc = s.matmul(&r, &c)?;
        Ok((iy.values, rc.values, s.transcript().rounds, s.transcript().ring_mults))
    })
    .unwrap();
    assert_eq!(open(&a.0, &b.0, &ring), ysecret);
    assert_eq!(open(&a.1, &b.1, &ring), vec![14]);
    assert_eq!(a.2, 2);
    assert_eq!(a.3, 8 + 2);
}

#[test]
fn matmul_dimension_mismatch_aborts_without_traffic() {
    let ring = Ring::<u64>::word();
    let (a, _) = run_pair(ring, test_seed(6), |s| {
        let x = ShareMatrix::new(s.role(), 2, 2, vec![0; 4])?;
        let y = ShareMatrix::new(s.role(), 3, 1, vec![0; 3])?;
        let r = s.matmul(&x, &y);
        Ok((matches!(r, Err(Error::Dimension(_))), s.transcript().rounds))
    })
    .unwrap();
    assert_eq!(a, (true, 0));
}

#[test]
fn inner_products() {
    let ring = Ring::<u64>::word();
    let w = split_all(&[1u64, 2, 3], &ring, 16);
    let x = split_all(&[4u64, 5, 6], &ring, 17);
    let zero = split_all(&[0u64, 0, 0], &ring, 18);
    let one_w = split_all(&[123_456_789u64], &ring, 19);
    let one_x = split_all(&[987_654_321u64], &ring, 20);
    let (a, b) = run_pair(ring, test_seed(7), |s| {
        let ip = s.inner_product(mine(s, &w), mine(s, &x))?;
        let z = s.inner_product(mine(s, &zero), mine(s, &x))?;
        let single = s.inner_product(mine(s, &one_w), mine(s, &one_x))?;
        let m = s.mul(mine(s, &one_w)[0], mine(s, &one_x)[0])?;
        let bad = s.inner_product(&[0, 0], &[0]).is_err();
        Ok((vec![ip, z, single, m], bad, s.transcript().rounds))
    })
    .unwrap();
    let r = open(&a.0, &b.0, &ring);
    assert_eq!(r[0], 32);
    assert_eq!(r[1], 0);
    assert_eq!(r[2], 123_456_789u64.wrapping_mul(987_654_321));
    assert_eq!(r[2], r[3]);
    assert!(a.1);
    assert_eq!(a.2, 4);
}

#[test]
fn bit_products_packed() {
    let ring = Ring::<u64>::word();
    // 1010 and 1100, LSB first
    let x = PackedBits::from_bools([false, true, false, true]);
    let y = PackedBits::from_bools([false, false, true, true]);
    let mut r = rng(21);
    let xa = PackedBits::random(4, &mut r);
    let ya = PackedBits::random(4, &mut r);
    let xs = [xa.clone(), x.xor(&xa)];
    let ys = [ya.clone(), y.xor(&ya)];
    let (a, b) = run_pair(ring, test_seed(8), |s| s.and_bits(mine(s, &xs), mine(s, &ys))).unwrap();
    assert_eq!(a.xor(&b), PackedBits::from_bools([false, false, false, true]));
}

#[test]
fn rounds_do_not_depend_on_batch_size() {
    let ring = Ring::<u64>::word();
    let (a, _) = run_pair(ring, test_seed(9), |s| {
        let mut rounds = Vec::new();
        for n in [1usize, 2048] {
            let before = s.transcript().rounds;
            s.batch_mul(&vec![3; n], &vec![5; n])?;
            let bits = PackedBits::ones(n);
            s.and_bits(&bits, &bits)?;
            rounds.push(s.transcript().rounds - before);
        }
        Ok(rounds)
    })
    .unwrap();
    assert_eq!(a, vec![2, 2]);
}

#[test]
fn exchange_byte_accounting() {
    let ring = Ring::<u64>::word();
    let (a, b) = run_pair(ring, test_seed(10), |s| {
        s.batch_mul(&[1; 512], &[2; 512])?;
        Ok(s.transcript().clone())
    })
    .unwrap();
    assert_eq!(a.bytes_sent, 13 + 8 * 1024);
    assert_eq!(a.bytes_received, 8205);
    assert_eq!(b.bytes_sent, 8205);
    assert_eq!(a.digest(), b.digest());
}
