"""Global and by-parts verdicts of P1-P6 on the T=1 refinement."""
from fairparts.corpus import TABLE_PROPERTIES, teg1
from fairparts.modelcheck import format_table, property_table


def main():
    pair = teg1()
    rows = property_table(pair.abstract, pair.refined, pair.mu,
                          {name: pair.formula(name) for name in TABLE_PROPERTIES})
    print(format_table(rows))


if __name__ == "__main__":
    main()
