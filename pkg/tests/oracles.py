"""Independent reference implementations used as test oracles."""

from fractions import Fraction


def brute_force_pcsi(cells, cutoff=-7, window=(90, 150), persist=3, elevation=1):
    """Persistence rule re-derived with exact rational arithmetic.

    ``cells`` is an iterable of (day_offset, symptom, score). Returns
    (persistent symptoms, lc flag, pcsi as Fraction, basis) or None when a
    window is empty.
    """
    cells = list(cells)
    days_base = {d for d, _, _ in cells if d <= cutoff}
    days_post = {d for d, _, _ in cells if window[0] <= d <= window[1]}
    if not days_base or not days_post:
        return None

    def means(days):
        acc = {}
        for d, s, v in cells:
            if d in days:
                acc.setdefault(s, []).append(Fraction(v))
        return {s: sum(v) / len(v) for s, v in acc.items()}

    base, post = means(days_base), means(days_post)
    persistent = set()
    for s, m in post.items():
        if m >= persist and m - base.get(s, Fraction(1)) >= elevation:
            persistent.add(s)
    if persistent:
        return persistent, True, sum(post[s] for s in persistent) / len(persistent), "persistent_mean"
    return set(), False, sum(post.values()) / len(post), "all_symptom_mean"
