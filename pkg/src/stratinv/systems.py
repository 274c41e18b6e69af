"""Bundled example systems in the input text format.

`thermostat` is the running model used throughout the test suite: a heater
with an error mode (e), a heating mode (h) and a free fan bit (f), one
temperature t, and a nondeterministic external temperature te in [14, 19].
Its strongest box invariant has the exact bounds 365/16 (upper) and
16 / 71/4 (lower, per heating mode).
"""

from __future__ import annotations

THERMOSTAT = """\
system thermostat
bool e
bool h
bool f
num t
input num te
init (and (not e) h)
init-num t = 16
template box
transition (or
  # spurious temperature reading trips the error latch
  (and (not e) e' (or (and h h') (and (not h) (not h'))) (< 30 t) (= t' t))
  (and (not e) e' (or (and h h') (and (not h) (not h'))) (< t 15) (= t' t))
  # too hot: switch the heating off
  (and h (not h') (or (and e e') (and (not e) (not e'))) (< 22 t) (<= t 30) (= t' t))
  # heating
  (and (not e) h (not e') h' (<= t 22) (<= 14 te) (<= te 19)
       (= t' (+ (* 15/16 t) (* 1/16 te) 1)))
  # too cold: switch the heating on
  (and (not e) (not h) (not e') h' (<= 15 t) (< t 18) (= t' t))
  # drifting toward the external temperature
  (and (not h) (not h') (or (and e e') (and (not e) (not e'))) (<= 18 t)
       (<= 14 te) (<= te 19) (= t' (* 1/16 (+ (* 15 t) te)))))
"""

IDENTITY = """\
system identity
bool m
num x
init (and m)
init-num x = 3
template box
transition (and (or (and m m') (and (not m) (not m'))) (= x' x))
"""

COUNTER = """\
system counter
bool up
num x
init (and up)
init-num x = 0
template box
transition (or
  (and up up' (<= x 4) (= x' (+ x 1)))
  (and up (not up') (<= 5 x) (= x' x))
  (and (not up) (not up') (<= 1 x) (= x' (- x 1)))
  (and (not up) up' (<= x 0) (= x' x)))
"""

BUNDLED = {
    "thermostat": THERMOSTAT,
    "identity": IDENTITY,
    "counter": COUNTER,
}
