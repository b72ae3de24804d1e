"""Regenerate src/iqrip/data/corpus.txt.

The corpus mixes three sources:

* sentences from a small probabilistic grammar whose word banks are drawn
  with Zipf-like weights, so the unigram distribution has a realistic tail
  and many next-word distributions are flat;
* Byron's "She Walks in Beauty" (1814, public domain), tokenized;
* blocks of the refrain ``she walks in beauty .`` repeated three times,
  which gives greedy decoding a strong attractor loop.

The output is deterministic for a given seed.  Usage::

    python tools/make_corpus.py [--seed 20240601] [--tokens 50000]
"""

from __future__ import annotations

import argparse
import random
from pathlib import Path

POEM = """
She walks in beauty , like the night
Of cloudless climes and starry skies ;
And all that 's best of dark and bright
Meet in her aspect and her eyes ;
Thus mellowed to that tender light
Which heaven to gaudy day denies .
One shade the more , one ray the less ,
Had half impaired the nameless grace
Which waves in every raven tress ,
Or softly lightens o'er her face ;
Where thoughts serenely sweet express ,
How pure , how dear their dwelling-place .
And on that cheek , and o'er that brow ,
So soft , so calm , yet eloquent ,
The smiles that win , the tints that glow ,
But tell of days in goodness spent ,
A mind at peace with all below ,
A heart whose love is innocent !
"""

REFRAIN = "she walks in beauty ."

NOUNS = """
man woman child king queen sailor farmer soldier poet painter stranger traveler
mother father brother sister friend servant priest merchant hunter shepherd
house door window garden field river mountain forest road bridge village city
tower castle church market harbor ship boat cart horse dog cat bird wolf fox
sheep cow deer owl crow raven hawk fish tree flower rose grass stone rock hill
valley lake sea shore wave wind rain snow storm cloud sky sun moon star light
shadow fire smoke ash dust sand gold silver iron bread wine water milk salt
letter book song story word name voice dream memory secret truth promise
morning evening winter summer spring autumn season hour year day week minute
table chair bed lamp candle mirror clock bell key box basket coat hat boot
ring sword shield bow arrow wheel rope net basket bottle cup plate knife
heart hand face eye head arm foot shoulder finger lip hair
journey battle feast wedding funeral harvest festival prayer silence laughter
fear hope anger sorrow joy grief courage pride shame wonder
king's daughter widow orphan captain doctor teacher student thief judge
garden wall gate path meadow orchard well mill barn bench fence
""".split()

ADJECTIVES = """
old young little great small tall dark bright cold warm quiet loud gentle
wild ancient empty heavy pale green red white black golden silver grey blue
broken hidden lonely distant silent strange sweet bitter proud humble poor
rich tired hungry brave foolish wise kind cruel honest patient careful
narrow wide deep shallow soft hard rough smooth sharp dull clean dirty
sudden slow swift early late long short heavy light faint strong weak
sacred secret holy common familiar curious gentle frozen burning fallen
wooden stony sandy misty rainy windy sunny cloudy
""".split()

VERBS_T = """
saw found took gave made kept held left lost met heard called followed carried
opened closed watched built broke pulled pushed loved hated feared praised
remembered forgot answered asked told showed brought sold bought painted
crossed climbed entered reached touched washed cleaned burned buried raised
carried dragged chased caught lifted dropped filled emptied hid guarded
visited greeted thanked warned helped wounded healed fed led joined
""".split()

VERBS_I = """
slept waited laughed wept sang danced prayed smiled sighed trembled
walked ran rode wandered sat stood fell rose turned stayed returned
listened spoke whispered shouted vanished appeared arrived departed
hesitated rested worked fought died lived dreamed
""".split()

ADVERBS = """
slowly quickly quietly softly gently suddenly often again alone together
forever still once twice early late carefully badly gladly sadly
there here away home outside inside
""".split()

PREPOSITIONS = """
on over under near beyond across through behind beside toward along around
upon within against into from with without past below above by
""".split()

DETERMINERS = "the a his their this that our my every no one".split()
PRONOUNS = "he they we i you it".split()
OBJECT_PRONOUNS = "him them us me it".split()
NAMES = """
john mary thomas anne william margaret henry alice robert elizabeth peter
jane edward lucy george ellen
""".split()


class Bank:
    """Weighted word choice with weights proportional to rank ** -s."""

    def __init__(self, words, rng, s=0.8, shuffle=True):
        words = list(dict.fromkeys(words))
        if shuffle:
            rng.shuffle(words)
        self.words = words
        self.weights = [1.0 / (r + 1) ** s for r in range(len(words))]
        self.rng = rng

    def __call__(self):
        return self.rng.choices(self.words, self.weights)[0]


def build(seed: int, target: int) -> str:
    rng = random.Random(seed)
    noun, adj = Bank(NOUNS, rng), Bank(ADJECTIVES, rng)
    vt, vi = Bank(VERBS_T, rng), Bank(VERBS_I, rng)
    adv, prep = Bank(ADVERBS, rng), Bank(PREPOSITIONS, rng, 0.9)
    det, pron = Bank(DETERMINERS, rng, 1.0, shuffle=False), Bank(PRONOUNS, rng)
    opron, name = Bank(OBJECT_PRONOUNS, rng), Bank(NAMES, rng)

    def np_():
        r = rng.random()
        if r < 0.08:
            return [name()]
        if r < 0.55:
            return [det(), noun()]
        if r < 0.93:
            return [det(), adj(), noun()]
        return [det(), adj(), adj(), noun()]

    def subj():
        return [pron()] if rng.random() < 0.3 else np_()

    def obj():
        return [opron()] if rng.random() < 0.2 else np_()

    templates = [
        (5, lambda: subj() + [vt()] + obj()),
        (3, lambda: subj() + [vi(), adv()]),
        (4, lambda: subj() + [vi(), prep()] + np_()),
        (3, lambda: subj() + [vt()] + obj() + [prep()] + np_()),
        (2, lambda: [prep()] + np_() + [","] + subj() + [vt()] + obj()),
        (2, lambda: subj() + [vt()] + obj() + ["and", vt()] + obj()),
        (2, lambda: subj() + ["was", adj(), "and", adj()]),
        (2, lambda: ["the", noun(), "of"] + np_() + [vi()]),
        (1, lambda: subj() + [vi()] + [",", "and"] + subj() + [vi(), adv()]),
    ]
    weights = [w for w, _ in templates]
    poem = POEM.lower().split()

    out: list[str] = []
    sentences = 0
    while len(out) < target:
        if sentences % 100 == 50:
            out.extend(REFRAIN.split() * 3)
        if sentences % 400 == 0:
            out.extend(poem)
        make = rng.choices(templates, weights)[0][1]
        out.extend(make() + ["."])
        sentences += 1

    lines, line = [], []
    for tok in out:
        line.append(tok)
        if tok in (".", "!", "?"):
            lines.append(" ".join(line))
            line = []
    if line:
        lines.append(" ".join(line))
    return "\n".join(lines) + "\n"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--tokens", type=int, default=50000)
    ap.add_argument(
        "--out", type=Path, default=Path(__file__).resolve().parents[1] / "src" / "iqrip" / "data" / "corpus.txt"
    )
    args = ap.parse_args()
    text = build(args.seed, args.tokens)
    args.out.write_text(text, encoding="utf-8")
    print(f"wrote {len(text.split())} tokens to {args.out}")


if __name__ == "__main__":
    main()
