"""A transition partition that ignores the refinement hides a global violation of Q'."""
from fairparts.corpus import naive_assignment, teg1
from fairparts.modelcheck import ALGORITHMIC, demonstrate_naive_unsoundness
from fairparts.partition import refinement_parts


def main():
    pair = teg1()
    ts = pair.refined.ts
    q = pair.formula("P'")

    naive = demonstrate_naive_unsoundness(pair.refined, naive_assignment(pair), q)
    print(f"global: {'holds' if naive.global_verdict.holds else 'fails'}")
    print("counterexample:", naive.global_verdict.counterexample.render(ts))
    for r in naive.results:
        print(f"naive block {r.part.name}: {'holds' if r.holds else 'fails'}")
    print(f"paradox: {naive.paradox}")

    parts = refinement_parts(pair.refined, pair.mu, pair.abstract)
    fixed = demonstrate_naive_unsoundness(pair.refined, None, q, mode=ALGORITHMIC, parts=parts)
    for r in fixed.results:
        print(f"refinement part {r.part.name}: {'holds' if r.holds else 'fails'}")
    print(f"paradox with refinement parts: {fixed.paradox}")


if __name__ == "__main__":
    main()
