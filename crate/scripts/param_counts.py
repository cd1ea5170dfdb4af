#!/usr/bin/env python3
"""Closed-form trainable-parameter counts for the six classifier architectures.

This is a standalone arithmetic check, independent of the Rust
implementation: each architecture is expanded layer by layer below and the
totals are frozen into the acceptance suite.

Conventions:
  * counts include conv weights/biases, dense weights/biases and batch-norm
    scale+shift; batch-norm running statistics are not trainable and are
    excluded
  * convolutions inside inception blocks (and their shortcut projections)
    are bias-free; all other convolutions carry biases
  * MCDCNN and TLE-Net use 'same'-padded convolutions, so only the pooling
    stages shrink the time axis
"""

WINDOW_LENGTHS = [1250, 2500, 3750, 5000]  # 5/10/15/20 s at 250 Hz
IN_CH = 4  # horizontal/vertical gaze angle + horizontal/vertical velocity


def conv(out_ch, in_ch, k, bias=True):
    return out_ch * in_ch * k + (out_ch if bias else 0)


def dense(out_f, in_f):
    return out_f * in_f + out_f


def bn(ch):
    return 2 * ch


def ekyt(_length):
    # densely connected block: 8 convs, kernel 3, growth 32
    total = 0
    ch = IN_CH
    for _ in range(8):
        total += conv(32, ch, 3)
        ch += 32
    concat = IN_CH + 8 * 32  # 260
    total += dense(128, concat)
    total += bn(128)
    total += dense(2, 128)
    return total


def fcn(_length):
    total = conv(128, IN_CH, 8) + bn(128)
    total += conv(256, 128, 5) + bn(256)
    total += conv(128, 256, 3) + bn(128)
    total += dense(2, 128)
    return total


def tcn(_length):
    total = conv(64, IN_CH, 3)
    total += conv(128, 64, 3)
    total += conv(256, 128, 3)
    total += dense(2, 256)
    return total


def inception(_length):
    def block(in_ch):
        p = conv(32, in_ch, 1, bias=False)            # bottleneck
        p += sum(conv(32, 32, k, bias=False) for k in (8, 4, 2))
        p += conv(32, in_ch, 1, bias=False)           # max-pool branch 1x1
        p += bn(4 * 32)
        return p

    total = block(IN_CH) + 5 * block(128)
    # shortcut projections after blocks 3 and 6
    total += conv(128, IN_CH, 1, bias=False) + bn(128)
    total += conv(128, 128, 1, bias=False) + bn(128)
    total += dense(2, 128)
    return total


def mcdcnn(length):
    t = (length // 2) // 2  # two stride-2 pools, same-padded convs
    per_channel = conv(8, 1, 5) + conv(8, 8, 5)
    total = IN_CH * per_channel
    total += dense(732, IN_CH * 8 * t)
    total += dense(2, 732)
    return total


def tlenet(length):
    t = (length // 2) // 4  # pool2 then pool4
    total = conv(5, IN_CH, 5) + conv(20, 5, 5)
    total += dense(500, 20 * t)
    total += dense(2, 500)
    return total


ARCHS = [
    ("ekyt", ekyt),
    ("fcn", fcn),
    ("inception", inception),
    ("mcdcnn", mcdcnn),
    ("tcn", tcn),
    ("tlenet", tlenet),
]


def main():
    for name, f in ARCHS:
        counts = [f(length) for length in WINDOW_LENGTHS]
        cells = "  ".join(f"L={length}: {c}" for length, c in zip(WINDOW_LENGTHS, counts))
        print(f"{name:10s} {cells}")


if __name__ == "__main__":
    main()
