"""Refinement check, parts and by-parts verification of P on the T=1 protocol."""
from fairparts.corpus import teg1
from fairparts.modelcheck import verify_by_parts
from fairparts.partition import CLASS, FAIR_CLOSURE, FRONTIER, refinement_parts
from fairparts.refinement import check_refinement, format_verdict


def main():
    pair = teg1()
    ts1, ts2 = pair.abstract.ts, pair.refined.ts
    print(f"abstract: {ts1.n_states} states, refined: {ts2.n_states} states")

    verdict = check_refinement(pair.abstract, pair.refined, pair.mu)
    print(format_verdict(verdict, pair.abstract, pair.refined))

    for part in refinement_parts(pair.refined, pair.mu, pair.abstract):
        groups = {kind: ", ".join(ts2.name(s) for s in sorted(part.members(kind)))
                  for kind in (CLASS, FRONTIER, FAIR_CLOSURE)}
        print(f"part {part.name}: class {{{groups[CLASS]}}} frontier {{{groups[FRONTIER]}}} "
              f"fair closure {{{groups[FAIR_CLOSURE]}}}")

    report = verify_by_parts(pair.abstract, pair.refined, pair.mu, pair.formula("P"))
    names = [f.name for f in pair.refined.fairness]
    for r in report.results:
        kept = ", ".join(names[i] for i in r.relevant) or "none"
        print(f"P on {r.part.name}: {'holds' if r.holds else 'fails'} (fairness kept: {kept})")
    print(f"aggregate: {report.aggregate}")


if __name__ == "__main__":
    main()
