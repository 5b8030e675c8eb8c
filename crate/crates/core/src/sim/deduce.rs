//! Bounded Dolev-Yao deduction over concrete byte strings.
//!
//! Terms are byte strings tagged with a sort. Every term records the rule
//! and premises that produced it, so membership of a target comes with a
//! replayable derivation tree.
//!
//! Depth is the height of that tree counting cryptographic rule
//! applications only. Parsing a message, splitting fixed layouts and
//! concatenating key halves are free.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::recording::Trapdoors;
use crate::aka::{AUTN_LEN, HPK_BITS};
use crate::identity::{ctr_decrypt, Suci, SUPI_MAX_LEN};
use crate::prims::{
    hmac_sha256_parts, kdf_hmac, kdf_x963, sha3_256, shake256, xor, FTag, LongTermKey,
    MlKemDecapsKey, PrimitiveProvider, MLKEM_CT_LEN, MLKEM_EK_LEN, X25519_BASE_POINT,
};
use crate::wire::Message;
use crate::xwing::{self, XWingCiphertext, XWingPublicKey, XWingSecretKey, XWING_LABEL};

pub const DEFAULT_DEPTH: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Sort {
    XWingPk,
    XWingSk,
    XWingCt,
    MlKemEk,
    MlKemCt,
    MlKemDk,
    X25519Pub,
    X25519Scalar,
    Ss1,
    Ss2,
    SharedSecret,
    KUe,
    K1,
    K2,
    C1,
    C1Plain,
    MacTag,
    Supi,
    IdSn,
    Label,
    LongTermKey,
    Hpk,
    Autn,
    Conc,
    Amf,
    Mac,
    Sqn,
    Ak,
    Ck,
    Ik,
    Res,
    ResStar,
    HxresStar,
    Auts,
    KAusf,
    KSeaf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Rule {
    Public,
    /// Parsed from transcript entry `n`.
    Observed(usize),
    Leaked,
    Split,
    Concat,
    XWingDecaps,
    Expand,
    Dh,
    MlKemDecaps,
    Combine,
    Kdf512,
    Kdf8960,
    AesCtrDecrypt,
    F(&'static str),
    Unmask,
    ResStar,
    KAusf,
    KSeaf,
    Encaps,
    BreakX25519,
    BreakMlKem,
}

impl Rule {
    /// Whether applying this rule costs one unit of depth.
    pub fn counted(&self) -> bool {
        !matches!(
            self,
            Rule::Public | Rule::Observed(_) | Rule::Leaked | Rule::Split | Rule::Concat
        )
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Observed(n) => write!(f, "observed#{n}"),
            Rule::F(name) => write!(f, "{name}"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// Join key so multi-premise rules only pair related terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Link {
    None,
    /// ML-KEM share for this `c1`.
    C1(Vec<u8>),
    /// X25519 share between two public values.
    Pair([u8; 32], [u8; 32]),
    /// f-output over this `(rand, hpk)`.
    F { rand: Vec<u8>, hpk: Vec<u8> },
}

pub type TermId = usize;

#[derive(Debug, Clone)]
pub struct Term {
    pub sort: Sort,
    pub bytes: Vec<u8>,
    pub rule: Rule,
    pub premises: Vec<TermId>,
    pub depth: u32,
    link: Link,
}

/// Which extra powers the adversary has.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    pub break_x25519: bool,
    pub break_mlkem: bool,
    /// Encapsulate to every known public key with adversary randomness.
    pub adversary_encaps: bool,
}

/// A term produced by one rule application, before interning.
type Candidate = (Sort, Vec<u8>, Rule, Vec<TermId>, Link);

#[derive(Debug, Clone)]
pub struct Knowledge {
    terms: Vec<Term>,
    index: HashMap<(Sort, Vec<u8>), TermId>,
}

impl Default for Knowledge {
    fn default() -> Self {
        Self::new()
    }
}

impl Knowledge {
    pub fn new() -> Self {
        Self {
            terms: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Knowledge holding just the public constants.
    pub fn with_public(pk_hn: &XWingPublicKey, id_sn: &[u8]) -> Self {
        let mut k = Self::new();
        k.insert(Sort::XWingPk, pk_hn.as_bytes().to_vec(), Rule::Public, vec![], Link::None);
        k.insert(Sort::IdSn, id_sn.to_vec(), Rule::Public, vec![], Link::None);
        k.insert(Sort::Label, XWING_LABEL.to_vec(), Rule::Public, vec![], Link::None);
        k
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term(&self, id: TermId) -> &Term {
        &self.terms[id]
    }

    pub fn get(&self, sort: Sort, bytes: &[u8]) -> Option<TermId> {
        self.index.get(&(sort, bytes.to_vec())).copied()
    }

    /// Membership by byte equality, any sort.
    pub fn find_bytes(&self, bytes: &[u8]) -> Option<TermId> {
        self.terms.iter().position(|t| t.bytes == bytes)
    }

    pub fn add_leak(&mut self, sort: Sort, bytes: Vec<u8>) -> Option<TermId> {
        self.insert(sort, bytes, Rule::Leaked, vec![], Link::None)
    }

    /// Parse an observed message into its fields.
    pub fn observe(&mut self, entry: usize, msg: &Message) {
        let mut fields: Vec<(Sort, Vec<u8>)> = Vec::new();
        let suci = |f: &mut Vec<(Sort, Vec<u8>)>, s: &Suci| {
            f.push((Sort::XWingCt, s.c0.as_bytes().to_vec()));
            f.push((Sort::C1, s.c1.clone()));
            f.push((Sort::MacTag, s.c2.to_vec()));
        };
        match msg {
            Message::Registration { suci: s } => suci(&mut fields, s),
            Message::AuthRequest { suci: s, id_sn } => {
                suci(&mut fields, s);
                fields.push((Sort::IdSn, id_sn.clone()));
            }
            Message::SeAvMsg {
                rand,
                autn,
                hxres_star,
            } => {
                fields.push((Sort::XWingCt, rand.as_bytes().to_vec()));
                fields.push((Sort::Autn, autn.to_bytes().to_vec()));
                fields.push((Sort::HxresStar, hxres_star.to_vec()));
            }
            Message::Challenge { rand, autn } => {
                fields.push((Sort::XWingCt, rand.as_bytes().to_vec()));
                fields.push((Sort::Autn, autn.to_bytes().to_vec()));
            }
            Message::Response { res_star } | Message::ResponseFwd { res_star } => {
                fields.push((Sort::ResStar, res_star.to_vec()));
            }
            Message::MacFailure => {}
            Message::SyncFailure {
                auts,
                rand,
                suci: s,
            } => {
                fields.push((Sort::Auts, auts.to_bytes().to_vec()));
                fields.push((Sort::XWingCt, rand.as_bytes().to_vec()));
                suci(&mut fields, s);
            }
            Message::KeyRelease { supi, k_seaf } => {
                fields.push((Sort::Supi, supi.as_bytes().to_vec()));
                fields.push((Sort::KSeaf, k_seaf.to_vec()));
            }
        }
        for (sort, bytes) in fields {
            self.insert(sort, bytes, Rule::Observed(entry), vec![], Link::None);
        }
    }

    fn depth_of(&self, rule: &Rule, premises: &[TermId]) -> u32 {
        let base = premises.iter().map(|p| self.terms[*p].depth).max().unwrap_or(0);
        base + u32::from(rule.counted())
    }

    /// Insert unless already known; structural splits follow at no cost.
    fn insert(
        &mut self,
        sort: Sort,
        bytes: Vec<u8>,
        rule: Rule,
        premises: Vec<TermId>,
        link: Link,
    ) -> Option<TermId> {
        let key = (sort, bytes);
        if self.index.contains_key(&key) {
            return None;
        }
        let depth = self.depth_of(&rule, &premises);
        let id = self.terms.len();
        self.terms.push(Term {
            sort,
            bytes: key.1.clone(),
            rule,
            premises,
            depth,
            link,
        });
        self.index.insert(key, id);
        self.split(id);
        Some(id)
    }

    fn split(&mut self, id: TermId) {
        let t = &self.terms[id];
        let b = t.bytes.clone();
        let parts: Vec<(Sort, Vec<u8>)> = match t.sort {
            Sort::XWingCt if b.len() == MLKEM_CT_LEN + 32 => vec![
                (Sort::MlKemCt, b[..MLKEM_CT_LEN].to_vec()),
                (Sort::X25519Pub, b[MLKEM_CT_LEN..].to_vec()),
            ],
            Sort::XWingPk if b.len() == MLKEM_EK_LEN + 32 => vec![
                (Sort::MlKemEk, b[..MLKEM_EK_LEN].to_vec()),
                (Sort::X25519Pub, b[MLKEM_EK_LEN..].to_vec()),
            ],
            Sort::KUe if b.len() == 64 => {
                vec![(Sort::K1, b[..32].to_vec()), (Sort::K2, b[32..].to_vec())]
            }
            Sort::C1Plain if b.len() > MLKEM_EK_LEN => {
                let n = b.len() - MLKEM_EK_LEN;
                vec![(Sort::Supi, b[..n].to_vec()), (Sort::MlKemEk, b[n..].to_vec())]
            }
            Sort::Autn if b.len() == AUTN_LEN => vec![
                (Sort::Conc, b[..6].to_vec()),
                (Sort::Amf, b[6..8].to_vec()),
                (Sort::Mac, b[8..].to_vec()),
            ],
            _ => Vec::new(),
        };
        for (sort, bytes) in parts {
            self.insert(sort, bytes, Rule::Split, vec![id], Link::None);
        }
    }

    fn ids(&self, sort: Sort) -> Vec<TermId> {
        self.terms
            .iter()
            .enumerate()
            .filter(|(_, t)| t.sort == sort)
            .map(|(i, _)| i)
            .collect()
    }

    fn b(&self, id: TermId) -> &[u8] {
        &self.terms[id].bytes
    }

    fn arr32(&self, id: TermId) -> Option<[u8; 32]> {
        self.b(id).try_into().ok()
    }

    /// Close under the rule set up to `depth` counted applications.
    pub fn closure(
        mut self,
        depth: u32,
        rules: &RuleSet,
        provider: &dyn PrimitiveProvider,
        trapdoors: &Trapdoors,
    ) -> Self {
        for round in 1..=depth {
            let before = self.terms.len();
            self.round(round, rules, provider, trapdoors);
            if self.terms.len() == before {
                break;
            }
        }
        self
    }

    /// One saturation layer. Only premise tuples whose result lands at
    /// exactly `round` are tried; shallower ones were tried earlier.
    fn round(&mut self, round: u32, rules: &RuleSet, p: &dyn PrimitiveProvider, td: &Trapdoors) {
        let fresh = |k: &Self, prem: &[TermId]| k.depth_of(&Rule::Dh, prem) == round;
        let mut out: Vec<Candidate> = Vec::new();

        // X-Wing decapsulation with a known secret key; key expansion.
        for sk in self.ids(Sort::XWingSk) {
            let Ok(skx) = XWingSecretKey::from_slice(self.b(sk)) else { continue };
            if fresh(self, &[sk]) {
                let e = shake256(skx.as_bytes(), 96);
                out.push((Sort::MlKemDk, e[..64].to_vec(), Rule::Expand, vec![sk], Link::None));
                out.push((Sort::X25519Scalar, e[64..].to_vec(), Rule::Expand, vec![sk], Link::None));
            }
            for ct in self.ids(Sort::XWingCt) {
                if !fresh(self, &[sk, ct]) {
                    continue;
                }
                let Ok(c) = XWingCiphertext::from_slice(self.b(ct)) else { continue };
                let ss = xwing::decapsulate(p, &c, &skx);
                out.push((Sort::SharedSecret, ss.as_bytes().to_vec(), Rule::XWingDecaps, vec![ct, sk], Link::None));
            }
        }

        // X25519 with a known scalar.
        for s in self.ids(Sort::X25519Scalar) {
            let Some(scalar) = self.arr32(s) else { continue };
            let own = p.x25519_dh(&scalar, &X25519_BASE_POINT);
            for pt in self.ids(Sort::X25519Pub) {
                if !fresh(self, &[s, pt]) {
                    continue;
                }
                let Some(point) = self.arr32(pt) else { continue };
                let ss2 = p.x25519_dh(&scalar, &point);
                out.push((Sort::Ss2, ss2.to_vec(), Rule::Dh, vec![s, pt], pair(own, point)));
            }
        }

        // ML-KEM decapsulation with a known decapsulation key.
        for dk in self.ids(Sort::MlKemDk) {
            let Ok(seed): Result<[u8; 64], _> = self.b(dk).try_into() else { continue };
            let key = MlKemDecapsKey::from_seed(seed[..32].try_into().unwrap(), seed[32..].try_into().unwrap());
            for c in self.ids(Sort::MlKemCt) {
                if !fresh(self, &[dk, c]) {
                    continue;
                }
                let Ok(c1): Result<[u8; MLKEM_CT_LEN], _> = self.b(c).try_into() else { continue };
                let ss1 = p.mlkem_decaps(&c1, &key);
                out.push((Sort::Ss1, ss1.to_vec(), Rule::MlKemDecaps, vec![c, dk], Link::C1(c1.to_vec())));
            }
        }

        // Break oracles.
        if rules.break_x25519 {
            let pubs = self.ids(Sort::X25519Pub);
            for &a in &pubs {
                let Some(pa) = self.arr32(a) else { continue };
                let Some(scalar) = td.x25519.get(&pa) else { continue };
                for &bb in &pubs {
                    if a == bb || !fresh(self, &[a, bb]) {
                        continue;
                    }
                    let Some(pb) = self.arr32(bb) else { continue };
                    let ss2 = p.x25519_dh(scalar, &pb);
                    out.push((Sort::Ss2, ss2.to_vec(), Rule::BreakX25519, vec![a, bb], pair(pa, pb)));
                }
            }
        }
        if rules.break_mlkem {
            for c in self.ids(Sort::MlKemCt) {
                if !fresh(self, &[c]) {
                    continue;
                }
                if let Some(ss1) = td.mlkem.get(self.b(c)) {
                    let link = Link::C1(self.b(c).to_vec());
                    out.push((Sort::Ss1, ss1.to_vec(), Rule::BreakMlKem, vec![c], link));
                }
            }
        }

        // Combiner: ss1 for c1 and ss2 for a pair containing c2.
        for ct in self.ids(Sort::XWingCt) {
            let cb = self.b(ct);
            if cb.len() != MLKEM_CT_LEN + 32 {
                continue;
            }
            let (c1, c2) = cb.split_at(MLKEM_CT_LEN);
            let c2: [u8; 32] = c2.try_into().unwrap();
            let ss1s: Vec<TermId> = self
                .ids(Sort::Ss1)
                .into_iter()
                .filter(|&i| self.terms[i].link == Link::C1(c1.to_vec()))
                .collect();
            for ss2 in self.ids(Sort::Ss2) {
                let Link::Pair(x, y) = self.terms[ss2].link else { continue };
                let pk2 = if x == c2 {
                    y
                } else if y == c2 {
                    x
                } else {
                    continue;
                };
                for &ss1 in &ss1s {
                    if !fresh(self, &[ct, ss1, ss2]) {
                        continue;
                    }
                    let ss = xwing::combine(
                        &self.arr32(ss1).unwrap(),
                        &self.arr32(ss2).unwrap(),
                        &c2,
                        &pk2,
                    );
                    out.push((Sort::SharedSecret, ss.as_bytes().to_vec(), Rule::Combine, vec![ct, ss1, ss2], Link::None));
                }
            }
        }

        // KDF expansions of shared secrets.
        for ss in self.ids(Sort::SharedSecret) {
            if !fresh(self, &[ss]) {
                continue;
            }
            let k = kdf_x963(self.b(ss), b"", 512).expect("fixed length");
            out.push((Sort::KUe, k, Rule::Kdf512, vec![ss], Link::None));
            let h = kdf_x963(self.b(ss), b"", HPK_BITS).expect("fixed length");
            out.push((Sort::Hpk, h, Rule::Kdf8960, vec![ss], Link::None));
        }

        // SUCI payload decryption.
        for c in self.ids(Sort::C1) {
            let n = self.b(c).len();
            if !(MLKEM_EK_LEN + 1..=MLKEM_EK_LEN + SUPI_MAX_LEN).contains(&n) {
                continue;
            }
            for k1 in self.ids(Sort::K1) {
                if !fresh(self, &[c, k1]) {
                    continue;
                }
                let Some(key) = self.arr32(k1) else { continue };
                let plain = ctr_decrypt(&key, self.b(c));
                out.push((Sort::C1Plain, plain, Rule::AesCtrDecrypt, vec![c, k1], Link::None));
            }
        }

        // f-family under a known long-term key.
        for k in self.ids(Sort::LongTermKey) {
            let Ok(key) = LongTermKey::new(self.b(k)) else { continue };
            for rand in self.ids(Sort::XWingCt) {
                for hpk in self.ids(Sort::Hpk) {
                    if !fresh(self, &[k, rand, hpk]) || self.b(rand).len() != self.b(hpk).len() {
                        continue;
                    }
                    let masked = xor(self.b(rand), self.b(hpk));
                    let link = Link::F {
                        rand: self.b(rand).to_vec(),
                        hpk: self.b(hpk).to_vec(),
                    };
                    for (sort, tag, name) in [
                        (Sort::Ak, FTag::F5, "f5"),
                        (Sort::Ck, FTag::F3, "f3"),
                        (Sort::Ik, FTag::F4, "f4"),
                        (Sort::Res, FTag::F2, "f2"),
                    ] {
                        let v = crate::prims::f(tag, &key, &masked).expect("non-empty input");
                        out.push((sort, v, Rule::F(name), vec![k, rand, hpk], link.clone()));
                    }
                }
            }
        }

        // SQN recovery from AUTN.
        for conc in self.ids(Sort::Conc) {
            for ak in self.ids(Sort::Ak) {
                if self.b(conc).len() != self.b(ak).len() || !fresh(self, &[conc, ak]) {
                    continue;
                }
                let sqn = xor(self.b(conc), self.b(ak));
                out.push((Sort::Sqn, sqn, Rule::Unmask, vec![conc, ak], Link::None));
            }
        }

        // RES*, K_AUSF from a matching (CK, IK[, RES]) triple.
        let cks = self.ids(Sort::Ck);
        let iks = self.ids(Sort::Ik);
        let ress = self.ids(Sort::Res);
        let idsns = self.ids(Sort::IdSn);
        let concs = self.ids(Sort::Conc);
        for &ck in &cks {
            let Link::F { rand, hpk } = self.terms[ck].link.clone() else { continue };
            for &ik in iks.iter().filter(|&&i| self.terms[i].link == self.terms[ck].link) {
                let mut key = self.b(ck).to_vec();
                key.extend_from_slice(self.b(ik));
                for &sn in &idsns {
                    for &res in ress.iter().filter(|&&i| self.terms[i].link == self.terms[ck].link) {
                        if !fresh(self, &[ck, ik, sn, res]) {
                            continue;
                        }
                        let v = hmac_sha256_parts(&key, &[self.b(sn), &rand, self.b(res)]);
                        out.push((Sort::ResStar, v.to_vec(), Rule::ResStar, vec![ck, ik, sn, res], Link::None));
                    }
                    for &conc in &concs {
                        if !fresh(self, &[ck, ik, sn, conc]) {
                            continue;
                        }
                        let v = hmac_sha256_parts(&key, &[self.b(sn), self.b(conc), &hpk]);
                        out.push((Sort::KAusf, v.to_vec(), Rule::KAusf, vec![ck, ik, sn, conc], Link::None));
                    }
                }
            }
        }
        for ka in self.ids(Sort::KAusf) {
            for &sn in &idsns {
                if !fresh(self, &[ka, sn]) {
                    continue;
                }
                let v = kdf_hmac(self.b(ka), self.b(sn));
                out.push((Sort::KSeaf, v.to_vec(), Rule::KSeaf, vec![ka, sn], Link::None));
            }
        }

        // Adversary's own encapsulations to assembled public keys.
        if rules.adversary_encaps {
            for ek in self.ids(Sort::MlKemEk) {
                for x in self.ids(Sort::X25519Pub) {
                    let mut pk = self.b(ek).to_vec();
                    pk.extend_from_slice(self.b(x));
                    self.insert(Sort::XWingPk, pk, Rule::Concat, vec![ek, x], Link::None);
                }
            }
            for pk in self.ids(Sort::XWingPk) {
                if !fresh(self, &[pk]) {
                    continue;
                }
                let Ok(pkx) = XWingPublicKey::from_slice(self.b(pk)) else { continue };
                let mut rng = ChaCha20Rng::from_seed(sha3_256(self.b(pk)));
                let Ok((ss, ct)) = xwing::encapsulate(p, &pkx, None, &mut rng) else { continue };
                out.push((Sort::XWingCt, ct.as_bytes().to_vec(), Rule::Encaps, vec![pk], Link::None));
                out.push((Sort::SharedSecret, ss.as_bytes().to_vec(), Rule::Encaps, vec![pk], Link::None));
            }
        }

        for (sort, bytes, rule, premises, link) in out {
            self.insert(sort, bytes, rule, premises, link);
        }
    }

    /// Indented derivation tree for `id`.
    pub fn witness(&self, id: TermId) -> String {
        let mut s = String::new();
        self.witness_into(id, 0, &mut s);
        s
    }

    fn witness_into(&self, id: TermId, indent: usize, s: &mut String) {
        let t = &self.terms[id];
        let head: String = hex::encode(&t.bytes[..t.bytes.len().min(8)]);
        let _ = writeln!(
            s,
            "{:indent$}{:?} {}{} <- {} [depth {}]",
            "",
            t.sort,
            head,
            if t.bytes.len() > 8 { ".." } else { "" },
            t.rule,
            t.depth,
            indent = indent * 2
        );
        for &p in &t.premises {
            self.witness_into(p, indent + 1, s);
        }
    }

    /// Re-evaluate a derivation from its leaves and confirm every node.
    pub fn replay(&self, id: TermId, provider: &dyn PrimitiveProvider, td: &Trapdoors) -> bool {
        let t = &self.terms[id];
        if !t.premises.iter().all(|&p| self.replay(p, provider, td)) {
            return false;
        }
        let mut probe = Knowledge::new();
        for &p in &t.premises {
            let pt = &self.terms[p];
            probe.push_raw(pt.clone());
        }
        match t.rule {
            Rule::Public | Rule::Observed(_) | Rule::Leaked => true,
            Rule::Split | Rule::Concat => {
                let joined: Vec<u8> = t.premises.iter().flat_map(|&p| self.b(p).to_vec()).collect();
                match t.rule {
                    Rule::Concat => joined == t.bytes,
                    _ => contains(&joined, &t.bytes),
                }
            }
            _ => {
                let rules = RuleSet {
                    break_x25519: t.rule == Rule::BreakX25519,
                    break_mlkem: t.rule == Rule::BreakMlKem,
                    adversary_encaps: t.rule == Rule::Encaps,
                };
                let depth = probe.terms.iter().map(|x| x.depth).max().unwrap_or(0) + 1;
                probe.round(depth, &rules, provider, td);
                probe.get(t.sort, &t.bytes).is_some()
            }
        }
    }

    fn push_raw(&mut self, t: Term) {
        let id = self.terms.len();
        self.index.insert((t.sort, t.bytes.clone()), id);
        self.terms.push(t);
    }
}

fn pair(a: [u8; 32], b: [u8; 32]) -> Link {
    if a <= b {
        Link::Pair(a, b)
    } else {
        Link::Pair(b, a)
    }
}

fn contains(hay: &[u8], needle: &[u8]) -> bool {
    needle.is_empty() || hay.windows(needle.len()).any(|w| w == needle)
}
