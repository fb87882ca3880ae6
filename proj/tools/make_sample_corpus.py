#!/usr/bin/env python3
"""Regenerate the bundled sample data under data/.

Writes three files:
  sample_corpus.jsonl   {"text": ...}                      LM / labeling corpus
  sample_prompts.jsonl  {"prompt": ..., "reference": ...}  bench prompts
  synonyms.json         token -> [synonyms]                paraphrase table

The documents are short news-style reports produced from a seeded template
grammar. Every slot is filled with a Zipf-weighted choice so the n-gram
statistics have a realistic head and tail. Output is byte-identical across
runs for a given seed.
"""

import argparse
import json
import random
from pathlib import Path

SYNONYMS = [
    ["said", "stated", "reported", "announced", "claimed"],
    ["big", "large", "major", "huge", "significant"],
    ["small", "minor", "modest", "slight", "limited"],
    ["rise", "increase", "growth", "jump", "surge"],
    ["fall", "drop", "decline", "slump", "dip"],
    ["people", "residents", "citizens", "locals", "households"],
    ["officials", "authorities", "leaders", "ministers", "managers"],
    ["plan", "proposal", "scheme", "strategy", "programme"],
    ["new", "fresh", "novel", "recent", "latest"],
    ["important", "key", "crucial", "vital", "essential"],
    ["quickly", "rapidly", "swiftly", "promptly", "soon"],
    ["began", "started", "launched", "opened", "commenced"],
    ["help", "support", "assist", "aid", "benefit"],
    ["show", "reveal", "indicate", "suggest", "confirm"],
    ["city", "town", "borough", "district", "county"],
    ["company", "firm", "business", "group", "operator"],
    ["police", "officers", "detectives", "investigators", "constables"],
    ["children", "pupils", "students", "youngsters", "families"],
    ["hospital", "clinic", "infirmary", "surgery", "centre"],
    ["money", "funds", "cash", "funding", "investment"],
    ["problem", "issue", "difficulty", "concern", "challenge"],
    ["work", "labour", "effort", "activity", "project"],
    ["buy", "purchase", "acquire", "obtain", "secure"],
    ["build", "construct", "erect", "develop", "create"],
    ["warned", "cautioned", "alerted", "advised", "told"],
    ["expected", "predicted", "forecast", "projected", "likely"],
    ["area", "region", "zone", "territory", "community"],
    ["result", "outcome", "consequence", "effect", "impact"],
    ["change", "shift", "reform", "overhaul", "review"],
    ["event", "incident", "accident", "episode", "emergency"],
    ["meeting", "hearing", "session", "inquiry", "debate"],
    ["delayed", "postponed", "suspended", "halted", "paused"],
    ["approved", "backed", "endorsed", "accepted", "agreed"],
    ["criticised", "condemned", "attacked", "questioned", "challenged"],
    ["injured", "hurt", "wounded", "harmed", "affected"],
]

PLACES = """london cardiff glasgow belfast leeds bristol york manchester liverpool
oxford cambridge dundee swansea norwich exeter brighton derby leicester aberdeen
bath plymouth newport sheffield nottingham coventry hull sunderland preston
lincoln carlisle inverness stirling wrexham bangor durham chester worcester
hereford truro ipswich reading swindon luton salisbury""".split()

NAMES = """smith jones taylor brown williams wilson johnson davies evans thomas
roberts walker wright green hall wood clarke hughes edwards turner harris
martin cooper hill ward morris moore clark lee king baker harrison morgan
allen james scott phillips watson davis parker price bennett young griffiths
mitchell kelly cook carter richardson bailey collins bell shaw murphy miller
cox richards khan marshall""".split()

FIRST = """john sarah david emma michael laura james claire peter helen mark
rachel paul anna andrew kate simon lucy richard karen""".split()

TITLES = """minister mayor councillor chief director professor spokesman inspector
chairman secretary superintendent manager coach headteacher surgeon""".split()

TOPICS = {
    "housing": "homes rents tenants landlords estates flats mortgages builders planners developers prices repairs",
    "health": "patients nurses doctors waiting treatment beds surgery wards ambulances appointments vaccines staff",
    "transport": "trains buses roads passengers fares stations rail drivers timetables services lorries bridges",
    "schools": "teachers classes exams lessons grades budgets heads pupils classrooms inspections governors uniforms",
    "energy": "prices bills turbines power households suppliers grid meters tariffs pipelines solar batteries",
    "football": "players fans goals season stadium manager league tickets referees strikers defenders trophies",
    "weather": "floods storms rain winds snow warnings rivers temperatures roads drains forecasters defences",
    "crime": "arrests burglaries courts witnesses victims charges patrols thefts prisons sentences gangs robberies",
    "farming": "crops harvest cattle farmers fields markets sheep tractors subsidies barley milk orchards",
    "technology": "software devices data users networks startups apps servers engineers chips platforms broadband",
    "tourism": "visitors hotels beaches museums festivals bookings cafes attractions tours restaurants crowds ferries",
    "environment": "pollution recycling wildlife forests emissions rivers beaches litter parks species habitats plastics",
}

NUMBERS = """two three four five six seven eight ten twelve fifteen twenty thirty
forty fifty hundreds thousands""".split()
DAYS = "monday tuesday wednesday thursday friday saturday sunday".split()
MONTHS = "january february march april may june july august september october november december".split()
ADJ = """serious local national public private former senior annual early late
regional independent urgent rural coastal northern southern historic growing
temporary permanent""".split()
VERB_PAST = """closed reopened expanded reduced improved cancelled extended
inspected replaced repaired sold visited""".split()
REACT = """welcomed criticised questioned praised rejected supported opposed
dismissed""".split()


def zipf_pick(rng, options, s=1.1):
    weights = [1.0 / (i + 1) ** s for i in range(len(options))]
    return rng.choices(options, weights=weights, k=1)[0]


def syn(rng, head):
    for group in SYNONYMS:
        if group[0] == head:
            return zipf_pick(rng, group, 1.4)
    return head


class Doc:
    def __init__(self, rng):
        self.rng = rng
        # Per-document lexicon order: each report favours its own slot values.
        self.topic = zipf_pick(rng, list(TOPICS), 0.6)
        words = TOPICS[self.topic].split()
        rng.shuffle(words)
        self.words = words
        places = PLACES[:]
        rng.shuffle(places)
        self.places = places
        self.name = zipf_pick(rng, NAMES, 0.7)
        self.first = zipf_pick(rng, FIRST, 0.7)
        self.title = zipf_pick(rng, TITLES, 0.8)
        self.place = self.places[0]

    def w(self):
        return zipf_pick(self.rng, self.words, 1.0)

    def p(self):
        return zipf_pick(self.rng, self.places, 1.6)

    def num(self):
        n = zipf_pick(self.rng, NUMBERS, 0.6)
        return n + " of" if n in ("hundreds", "thousands") else n

    def sentence(self):
        r, s, w, p = self.rng, lambda h: syn(self.rng, h), self.w, self.p
        month = lambda: zipf_pick(r, MONTHS, 0.5)  # noqa: E731
        day = lambda: zipf_pick(r, DAYS, 0.5)  # noqa: E731
        adj = lambda: zipf_pick(r, ADJ, 0.9)  # noqa: E731
        who = f"{self.title} {self.name}"
        templates = [
            lambda: f"{who} {s('said')} the {s('new')} {s('plan')} for {self.topic} in {p()} would {s('help')} {w()} and {w()} .",
            lambda: f"figures {s('show')} a {s('big')} {s('rise')} in {w()} across the {s('area')} since {month()} .",
            lambda: f"{s('officials')} in {p()} {s('warned')} that {w()} could face a {s('small')} {s('fall')} in {w()} this year .",
            lambda: f"on {day()} , {self.num()} {w()} were {s('injured')} in an {s('event')} near the {s('city')} centre .",
            lambda: f"the {s('company')} {s('began')} {s('work')} to {s('build')} {self.num()} {adj()} {w()} in {p()} .",
            lambda: f"{s('people')} {s('said')} the {s('problem')} with {w()} had been ignored for years .",
            lambda: f"a {adj()} report {s('expected')} that {self.topic} {s('money')} would {s('rise')} by {self.num()} per cent .",
            lambda: f"{s('police')} {s('said')} {self.num()} {w()} had been reported in {p()} since {month()} .",
            lambda: f"{s('children')} and {w()} will {s('help')} with the {s('work')} at the {s('hospital')} in {p()} .",
            lambda: f"the {s('result')} of the {s('change')} to {w()} was {zipf_pick(r, REACT)} by {who} .",
            lambda: f"it is {s('important')} that {w()} and {w()} are not forgotten , {s('said')} {self.first} {self.name} .",
            lambda: f"the {s('company')} plans to {s('buy')} {self.num()} {w()} {s('quickly')} before {month()} .",
            lambda: f"{p()} council {s('said')} the {s('money')} for {w()} was {s('expected')} to run out by {month()} .",
            lambda: f"the {self.topic} {s('plan')} has been {s('delayed')} after {s('people')} and {w()} complained .",
            lambda: f"a {s('meeting')} in {p()} on {day()} {s('approved')} plans to spend {self.num()} million pounds on {w()} .",
            lambda: f"{self.first} {self.name} , who has lived in {p()} for {self.num()} years , {s('said')} the {w()} were {zipf_pick(r, ['getting worse', 'improving', 'a disgrace', 'a success', 'too expensive'])} .",
            lambda: f"the {adj()} {w()} were {zipf_pick(r, VERB_PAST)} last {zipf_pick(r, ['week', 'month', 'year', 'summer', 'winter'])} after a {s('change')} by the {s('officials')} .",
            lambda: f"{who} {s('criticised')} the decision and called for a {adj()} {s('meeting')} into the {s('problem')} .",
            lambda: f"campaigners in {p()} have {s('warned')} that {w()} and {w()} will suffer if the {s('plan')} goes ahead .",
            lambda: f"a spokesperson for the {s('company')} {s('said')} : \" we are working {s('quickly')} to {s('help')} {w()} . \"",
            lambda: f"the {s('event')} is the {zipf_pick(r, ['third', 'second', 'fourth', 'latest', 'worst'])} of its kind in {p()} this year , {s('police')} {s('said')} .",
            lambda: f"more than {self.num()} {w()} have signed a petition against the {s('change')} .",
            lambda: f"the government {s('said')} it would {s('review')} the {s('money')} for {self.topic} in the {s('area')} .",
            lambda: f"{s('officials')} {s('expected')} the {w()} to return to normal by {month()} .",
        ]
        return zipf_pick(r, templates, 0.35)()

    def text(self):
        n = self.rng.randint(9, 14)
        return " ".join(self.sentence() for _ in range(n))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data")
    parser.add_argument("--docs", type=int, default=500)
    parser.add_argument("--seed", type=int, default=20231)
    parser.add_argument("--prompt-tokens", type=int, default=16)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    docs = [Doc(rng).text() for _ in range(args.docs)]
    args.out.mkdir(parents=True, exist_ok=True)

    with open(args.out / "sample_corpus.jsonl", "w") as f:
        for d in docs:
            f.write(json.dumps({"text": d}) + "\n")

    with open(args.out / "sample_prompts.jsonl", "w") as f:
        for d in docs:
            toks = d.split(" ")
            f.write(json.dumps({
                "prompt": " ".join(toks[: args.prompt_tokens]),
                "reference": " ".join(toks[args.prompt_tokens:]),
            }) + "\n")

    table = {}
    for group in SYNONYMS:
        for word in group:
            table.setdefault(word, [])
            table[word] += [o for o in group if o != word and o not in table[word]]
    with open(args.out / "synonyms.json", "w") as f:
        json.dump(table, f, indent=1, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
