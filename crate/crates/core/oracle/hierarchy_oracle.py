#!/usr/bin/env python3
"""Golden key hierarchies, SUCI sealing and AUTS values, composed from
hashlib/hmac/cryptography calls with no reference to the Rust code.

Writes:
  tests/data/hierarchy_golden.txt  (`hier` records, 13 hex fields)
  tests/data/identity_golden.txt   (`seal` and `auts` records)
"""

import hashlib
import hmac
import os
import sys

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from prims_oracle import f, x963

HERE = os.path.dirname(__file__)
DATA = os.path.join(HERE, "..", "tests", "data")


def stream(label: str, n: int) -> bytes:
    out = b""
    i = 0
    while len(out) < n:
        out += hashlib.sha256(f"{label}/{i}".encode()).digest()
        i += 1
    return out[:n]


def xor(a: bytes, b: bytes) -> bytes:
    assert len(a) == len(b)
    return bytes(x ^ y for x, y in zip(a, b))


def kdf_hmac(key: bytes, info: bytes) -> bytes:
    return hmac.new(key, info, hashlib.sha256).digest()


def hierarchy(k, rand, hpk, sqn, amf, id_sn):
    masked = xor(rand, hpk)
    mac = f("F1", k, sqn + amf + masked)
    ak = f("F5", k, masked)
    ck = f("F3", k, masked)
    ik = f("F4", k, masked)
    xres = f("F2", k, masked)
    xres_star = kdf_hmac(ck + ik, id_sn + rand + xres)
    hxres_star = hashlib.sha3_256(rand + xres_star).digest()[:16]
    k_ausf = kdf_hmac(ck + ik, id_sn + xor(ak, sqn) + hpk)
    k_seaf = kdf_hmac(k_ausf, id_sn)
    return mac, ak, ck, ik, xres, xres_star, hxres_star, k_ausf, k_seaf


def seal(ss_ue: bytes, supi: bytes, pk1: bytes):
    k_ue = x963(ss_ue, b"", 512)
    k1, k2 = k_ue[:32], k_ue[32:]
    enc = Cipher(algorithms.AES(k1[:16]), modes.CTR(k1[16:32])).encryptor()
    c1 = enc.update(supi + pk1) + enc.finalize()
    c2 = hmac.new(k2, c1, hashlib.sha256).digest()
    return c1, c2


def main() -> int:
    hier_lines = []
    cases = [
        ("a", b"5G:mnc093.mcc208.3gppnetwork.org", 0x000000000021, 0x8000),
        ("b", b"SN", 0x0000DEADBEEF, 0x8000),
        ("c", b"\x00", 0xFFFFFFFFFFFE, 0x0000),
        ("d", b"serving-network-d", 0x000000000001, 0x8001),
    ]
    for label, id_sn, sqn_int, amf_int in cases:
        k = stream(f"k-{label}", 32)
        rand = stream(f"rand-{label}", 1120)
        hpk = stream(f"hpk-{label}", 1120)
        sqn = sqn_int.to_bytes(6, "big")
        amf = amf_int.to_bytes(2, "big")
        mac, ak, ck, ik, xres, xres_star, hxres_star, k_ausf, k_seaf = hierarchy(
            k, rand, hpk, sqn, amf, id_sn
        )
        fields = [k, rand, hpk, sqn, amf, id_sn, ck, ik, xres, xres_star, hxres_star, k_ausf, k_seaf]
        hier_lines.append("hier " + " ".join(x.hex() for x in fields))

    # zero HPK case: masking must be the identity
    k = stream("k-zero", 32)
    rand = stream("rand-zero", 1120)
    hpk = bytes(1120)
    sqn = (5).to_bytes(6, "big")
    amf = (0x8000).to_bytes(2, "big")
    id_sn = b"zero-hpk"
    _, _, ck, ik, xres, xres_star, hxres_star, k_ausf, k_seaf = hierarchy(k, rand, hpk, sqn, amf, id_sn)
    fields = [k, rand, hpk, sqn, amf, id_sn, ck, ik, xres, xres_star, hxres_star, k_ausf, k_seaf]
    hier_lines.append("hier " + " ".join(x.hex() for x in fields))

    with open(os.path.join(DATA, "hierarchy_golden.txt"), "w") as fh:
        fh.write("# generated by oracle/hierarchy_oracle.py\n")
        fh.write("# hier k rand hpk sqn amf id_sn ck ik xres xres* hxres* k_ausf k_seaf\n")
        for line in hier_lines:
            fh.write(line + "\n")

    id_lines = []
    for label, supi_len in [("s1", 16), ("s2", 1), ("s3", 64)]:
        ss_ue = stream(f"ss-{label}", 32)
        supi = stream(f"supi-{label}", supi_len)
        pk1 = stream(f"pk1-{label}", 1184)
        c1, c2 = seal(ss_ue, supi, pk1)
        id_lines.append("seal " + " ".join(x.hex() for x in [ss_ue, supi, pk1, c1, c2]))

    for label, sqn_int in [("r1", 7), ("r2", 0x0000FFFF0000)]:
        k = stream(f"k-{label}", 32)
        rand = stream(f"rand-{label}", 1120)
        hpk = stream(f"hpk-{label}", 1120)
        sqn_ue = sqn_int.to_bytes(6, "big")
        amf = (0x8000).to_bytes(2, "big")
        masked = xor(rand, hpk)
        ak_star = f("F5S", k, masked)
        mac_star = f("F1S", k, sqn_ue + amf + masked)
        auts = xor(ak_star, sqn_ue) + amf + mac_star
        id_lines.append("auts " + " ".join(x.hex() for x in [k, rand, hpk, sqn_ue, amf, auts]))

    with open(os.path.join(DATA, "identity_golden.txt"), "w") as fh:
        fh.write("# generated by oracle/hierarchy_oracle.py\n")
        fh.write("# seal ss_ue supi pk1 c1 c2\n")
        fh.write("# auts k rand hpk sqn_ue amf auts\n")
        for line in id_lines:
            fh.write(line + "\n")
    print(f"wrote {len(hier_lines)} hierarchies, {len(id_lines)} identity records")
    return 0


if __name__ == "__main__":
    sys.exit(main())
