import time
from fractions import Fraction

from dyncache.beamform import trial_rate
from dyncache.model import Association, NetworkConfig
from dyncache.placement import Placement
from dyncache.scheduler import full_schedule
from dyncache.verifier import coverage_check, decode_check


def setup(P: int, Q: int, strategy: str) -> tuple[NetworkConfig, Association]:

    cfg = NetworkConfig.build(Fraction(1, 5), P, 9, 30 // P, L=10, Q=Q, strategy=strategy)
    assoc = Association.uniform(30, P, 30 // P, cfg.beta)

    return cfg, assoc


for P, Q, strategy in ((5, 2, "A"), (5, 3, "B"), (10, 5, "A")):
    cfg, assoc = setup(P, Q, strategy)
    print("K=30 P={} Q={} strategy {}:".format(P, Q, strategy))

    start = time.time()
    schedule = full_schedule(cfg, assoc)
    elapsed = time.time() - start
    print("[*] schedule: %d transmissions, %d streams in %f s" % (
        len(schedule.transmissions), schedule.J_M + schedule.J_U, elapsed))

    start = time.time()
    placement = Placement(cfg, assoc)
    ok = decode_check(schedule, placement, assoc).ok and coverage_check(schedule, placement).ok
    elapsed = time.time() - start
    print("[*] verify: %s in %f s" % ("ok" if ok else "FAILED", elapsed))

    ###

    if len(schedule.transmissions) > 500:
        print("[*] rate: skipped")
        continue
    start = time.time()
    rate, _ = trial_rate(schedule, cfg.with_snr_db(20.0), seed=0, trial=0)
    elapsed = time.time() - start
    print("[*] rate: one channel draw at 20 dB = %f in %f s (%f s per transmission)" % (
        rate, elapsed, elapsed / len(schedule.transmissions)))
