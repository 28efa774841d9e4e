"""The standard test battery: families with known verdicts, run through classify."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import catalog, cubic
from .core import FamilyDescriptor, affine_image
from .domains import DomainSpec
from .verifier import ClassifyConfig, classify

PROBE_BETAS = (-1.0, 1.0)


@dataclass(frozen=True)
class BatteryEntry:
    key: str
    build: object  # zero-argument callable returning a FamilyDescriptor
    expected: bool
    note: str = ""


def quartic_family():
    """V(m) = m^4 on m > 0: k(theta) = -(1/2) (-3 theta)^(2/3) on theta < 0.

    Not a polynomial variance of degree <= 3, so it is carried by its cumulant only.
    """
    tdom = DomainSpec.box([-np.inf], [0.0], [[-3.0], [-0.01]])
    mdom = DomainSpec.box([0.0], [np.inf], [[0.5], [3.0]])
    C = catalog.expression_cumulant("-(-3*theta)**(2/3)/2", 1, tdom, mdom)
    return FamilyDescriptor("quartic", cumulant=C, provenance={"variance": "m^4"})


def _poisson2():
    return catalog.product_family([catalog.build("poisson"), catalog.build("poisson")])


def default_battery():
    entries = [BatteryEntry(cid, lambda cid=cid: catalog.build(cid), True, "Morris family")
               for cid in catalog.MORRIS_IDS]
    entries += [
        BatteryEntry("cubic-normal", lambda: cubic.transform_family(catalog.build("normal"), 1.0), True,
                     "V = (1+m)^3"),
        BatteryEntry("cubic-poisson", lambda: cubic.transform_family(catalog.build("poisson"), 1.0), True,
                     "V = m(1+m)^2"),
        BatteryEntry("cubic-poisson2", lambda: cubic.transform_family(_poisson2(), [1.0, 0.0]), True,
                     "product poisson, beta = (1, 0)"),
        BatteryEntry("shifted-inverse-gaussian",
                     lambda: affine_image(catalog.build("inverse-gaussian"), [[1.0]], [1.0]), True,
                     "V = (m-1)^3"),
        BatteryEntry("inverse-gaussian", lambda: catalog.build("inverse-gaussian"), False,
                     "V = m^3, not in standard position"),
        BatteryEntry("quartic", quartic_family, False, "V = m^4"),
    ]
    return entries


@dataclass
class BatteryRow:
    entry: BatteryEntry
    family: FamilyDescriptor
    report: object

    @property
    def matches_expectation(self):
        return self.report.passed == self.entry.expected

    def to_dict(self):
        out = self.report.to_dict()
        out["key"] = self.entry.key
        out["expected"] = self.entry.expected
        out["matches_expectation"] = self.matches_expectation
        out["note"] = self.entry.note
        out["dimension"] = self.family.dimension
        return out


def thread_cap():
    try:
        return max(1, int(os.environ.get("NEFLAB_THREADS", "1")))
    except ValueError:
        return 1


def run_entry(entry, config):
    fam = entry.build()
    probes = PROBE_BETAS if fam.dimension == 1 else ()
    return BatteryRow(entry, fam, classify(fam, config, user_betas=probes))


def run_battery(entries=None, config=None, threads=None):
    entries = default_battery() if entries is None else entries
    config = config or ClassifyConfig()
    threads = thread_cap() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda e: run_entry(e, config), entries))
    return [run_entry(e, config) for e in entries]


def agreement_matrix(rows):
    """One record per (family, beta attempt) with the three statuses."""
    out = []
    for row in rows:
        for att in row.report.attempts:
            d = att.to_dict()
            out.append({
                "family": row.entry.key,
                "beta": d["beta"],
                "P1": d["P1"]["status"],
                "P2": d["P2"]["status"],
                "P3": d["P3"]["status"],
                "agreement": d["agreement"],
            })
    return out
