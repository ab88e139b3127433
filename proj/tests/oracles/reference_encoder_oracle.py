#!/usr/bin/env python3
"""Independent pure-Python model of the reference encoder.

Implements MT19937-64 from its published recurrence, the two-uniform
Box-Muller normal, channel-mean grayscale, 8x8 average pooling and the
seeded projection, then prints golden embeddings as a C++ include.

    reference_encoder_oracle.py            # print the include to stdout
    reference_encoder_oracle.py --check F  # exit 1 if F differs
"""

import argparse
import math
import sys

MASK64 = (1 << 64) - 1


class MT19937_64:
    NN, MM = 312, 156
    MATRIX_A = 0xB5026F5AA96619E9
    UM, LM = 0xFFFFFFFF80000000, 0x7FFFFFFF

    def __init__(self, seed):
        self.mt = [0] * self.NN
        self.mt[0] = seed & MASK64
        for i in range(1, self.NN):
            prev = self.mt[i - 1]
            self.mt[i] = (6364136223846793005 * (prev ^ (prev >> 62)) + i) & MASK64
        self.mti = self.NN

    def _twist(self):
        mt = self.mt
        for i in range(self.NN):
            x = (mt[i] & self.UM) | (mt[(i + 1) % self.NN] & self.LM)
            xa = x >> 1
            if x & 1:
                xa ^= self.MATRIX_A
            mt[i] = mt[(i + self.MM) % self.NN] ^ xa
        self.mti = 0

    def next(self):
        if self.mti >= self.NN:
            self._twist()
        x = self.mt[self.mti]
        self.mti += 1
        x ^= (x >> 29) & 0x5555555555555555
        x ^= (x << 17) & 0x71D67FFFEDA60000
        x ^= (x << 37) & 0xFFF7EEE000000000
        x ^= x >> 43
        return x & MASK64


def uniform_open0(rng):
    return ((rng.next() >> 11) + 1) * 2.0 ** -53


def standard_normal(rng):
    u1 = uniform_open0(rng)
    u2 = uniform_open0(rng)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def projection(proj_seed, out_dim):
    rng = MT19937_64(proj_seed)
    return [[standard_normal(rng) for _ in range(64)] for _ in range(out_dim)]


def pool(image, h, w, c):
    gray = [[sum(image[(r * w + col) * c + k] for k in range(c)) / c for col in range(w)] for r in range(h)]
    cells = []
    for a in range(8):
        r0, r1 = (a * h) // 8, -((-(a + 1) * h) // 8)
        for b in range(8):
            c0, c1 = (b * w) // 8, -((-(b + 1) * w) // 8)
            vals = [gray[r][col] for r in range(r0, r1) for col in range(c0, c1)]
            cells.append(sum(vals) / len(vals))
    return cells


def encode(image, h, w, c, proj_seed=42, out_dim=64):
    p = pool(image, h, w, c)
    out = [sum(wk * pk for wk, pk in zip(row, p)) for row in projection(proj_seed, out_dim)]
    n = math.sqrt(sum(v * v for v in out))
    return [v / n for v in out]


def gradient_gray16():
    return [(r * 16 + col) / 255.0 for r in range(16) for col in range(16)], 16, 16, 1


def gradient_rgb_10x13():
    px = []
    for r in range(10):
        for col in range(13):
            px += [r / 9.0, col / 12.0, ((r + col) % 5) / 4.0]
    return px, 10, 13, 3


def render():
    rng = MT19937_64(5489)
    for _ in range(9999):
        rng.next()
    lines = ["// Generated by tests/oracles/reference_encoder_oracle.py. Do not edit.", ""]
    lines.append("inline constexpr unsigned long long kMt64Default10000th = %dULL;" % rng.next())
    first = MT19937_64(42)
    lines.append("inline constexpr unsigned long long kMt64Seed42First[4] = {%s};"
                 % ", ".join("%dULL" % first.next() for _ in range(4)))
    normals = MT19937_64(42)
    lines.append("inline constexpr double kNormalSeed42First[4] = {%s};"
                 % ", ".join(repr(standard_normal(normals)) for _ in range(4)))
    for name, (img, h, w, c), seed, dim in [
        ("kGoldenGray16Seed42Dim64", gradient_gray16(), 42, 64),
        ("kGoldenRgb10x13Seed7Dim16", gradient_rgb_10x13(), 7, 16),
    ]:
        emb = encode(img, h, w, c, seed, dim)
        lines.append("inline constexpr double %s[%d] = {" % (name, dim))
        for i in range(0, dim, 4):
            lines.append("    " + ", ".join(repr(v) for v in emb[i:i + 4]) + ",")
        lines.append("};")
    return "\n".join(lines) + "\n"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", metavar="FILE")
    args = ap.parse_args()
    text = render()
    if args.check:
        with open(args.check) as f:
            if f.read() != text:
                print("golden include is stale: regenerate with reference_encoder_oracle.py", file=sys.stderr)
                return 1
        print("golden include matches the oracle")
        return 0
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
