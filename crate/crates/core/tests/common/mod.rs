#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use securelr::{Ring, RingWord, Role, Session};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Splits every value into uniformly random shares.
pub fn split_all<W: RingWord>(xs: &[W], ring: &Ring<W>, seed: u64) -> [Vec<W>; 2] {
    let (a, b) = securelr::sharing::split_vec(xs, ring, &mut rng(seed));
    [a, b]
}

/// This party's half of a pre-split pair.
pub fn mine<'a, W: RingWord, T>(s: &Session<W>, parts: &'a [T; 2]) -> &'a T {
    &parts[s.role().index()]
}

pub fn open<W: RingWord>(a: &[W], b: &[W], ring: &Ring<W>) -> Vec<W> {
    securelr::sharing::open_vec(a, b, ring)
}

pub fn role_of(i: usize) -> Role {
    Role::from_index(i).unwrap()
}

/// Runs `f` as both parties over an in-memory channel with the given randomness sources.
pub fn run_with_sources<W, T, F>(
    ring: Ring<W>,
    seed: securelr::Seed,
    sources: [Box<dyn securelr::CorrelatedSource>; 2],
    truncation: securelr::TruncationMode,
    f: F,
) -> securelr::Result<(T, T)>
where
    W: RingWord,
    T: Send,
    F: Fn(&mut Session<W>) -> securelr::Result<T> + Sync,
{
    let (ca, cb) = securelr::transport::local_pair();
    let [srca, srcb] = sources;
    let mut sa = Session::new(Role::A, ring, Box::new(ca), srca, securelr::engine::local_seed(&seed, Role::A))
        .with_truncation(truncation);
    let mut sb = Session::new(Role::B, ring, Box::new(cb), srcb, securelr::engine::local_seed(&seed, Role::B))
        .with_truncation(truncation);
    std::thread::scope(|scope| {
        let f = &f;
        let ha = scope.spawn(move || f(&mut sa));
        let hb = scope.spawn(move || f(&mut sb));
        let ra = ha.join().expect("alice panicked");
        let rb = hb.join().expect("bob panicked");
        Ok((ra?, rb?))
    })
}

/// Dealer-backed sources for both parties.
pub fn dealer_sources(seed: securelr::Seed, ring_bits: u32) -> [Box<dyn securelr::CorrelatedSource>; 2] {
    [Role::A, Role::B].map(|role| {
        let dealer = securelr::Dealer::new(seed, ring_bits).unwrap();
        Box::new(securelr::randomness::DealerSource::new(dealer, role)) as Box<dyn securelr::CorrelatedSource>
    })
}
