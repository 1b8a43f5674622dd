"""Dataset model: person records, corpus files, splits, and a synthetic generator."""

from __future__ import annotations

import json
import logging
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

from .errors import CorpusError, SplitError

logger = logging.getLogger(__name__)

DEFAULT_QA_PER_PERSON = 20
BACKGROUND_MIN_WORDS = 100
BACKGROUND_MAX_WORDS = 500


@dataclass(frozen=True)
class QAPair:
    question: str
    gold_answer: str
    owner_name: str

    def check(self) -> list[str]:
        """Return invariant violations (empty list when the pair is well-formed)."""
        problems = []
        if not self.question.strip():
            problems.append("empty question")
        if not self.gold_answer.strip():
            problems.append("empty answer")
        if self.owner_name not in self.question:
            problems.append(f"question does not contain owner name {self.owner_name!r}")
        return problems


@dataclass
class PersonRecord:
    name: str
    background: str
    popularity: int
    qa_pairs: list[QAPair] = field(default_factory=list)

    def background_word_count(self) -> int:
        return len(self.background.split())

    def is_complete(self, expected_qa: int = DEFAULT_QA_PER_PERSON) -> bool:
        return len(self.qa_pairs) == expected_qa

    def validation_issues(self, expected_qa: int = DEFAULT_QA_PER_PERSON) -> list[str]:
        """All invariant violations for this record."""
        problems = []
        if not self.name.strip():
            problems.append("empty name")
        if self.popularity < 0:
            problems.append(f"negative popularity {self.popularity}")
        wc = self.background_word_count()
        if not (BACKGROUND_MIN_WORDS <= wc <= BACKGROUND_MAX_WORDS):
            problems.append(
                f"background has {wc} words, expected between "
                f"{BACKGROUND_MIN_WORDS} and {BACKGROUND_MAX_WORDS}"
            )
        if not self.is_complete(expected_qa):
            problems.append(f"{len(self.qa_pairs)} QA pairs, expected {expected_qa}")
        for i, qa in enumerate(self.qa_pairs):
            if qa.owner_name != self.name:
                problems.append(f"qa[{i}] owned by {qa.owner_name!r}, not {self.name!r}")
            problems.extend(f"qa[{i}]: {p}" for p in qa.check())
        return problems


# ---------------------------------------------------------------------------
# Corpus files: one JSON record per line, UTF-8.
# Fields: name, background, popularity, qa_pairs [{question, answer}].
# ---------------------------------------------------------------------------

def record_to_dict(record: PersonRecord) -> dict:
    return {
        "name": record.name,
        "background": record.background,
        "popularity": record.popularity,
        "qa_pairs": [
            {"question": qa.question, "answer": qa.gold_answer} for qa in record.qa_pairs
        ],
    }


def record_from_dict(payload: dict) -> PersonRecord:
    try:
        name = payload["name"]
        return PersonRecord(
            name=name,
            background=payload["background"],
            popularity=int(payload["popularity"]),
            qa_pairs=[
                QAPair(question=qa["question"], gold_answer=qa["answer"], owner_name=name)
                for qa in payload["qa_pairs"]
            ],
        )
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"record missing field: {exc}") from exc


def load_corpus(path: str | Path, expected_qa: int = DEFAULT_QA_PER_PERSON) -> list[PersonRecord]:
    """Load a corpus file.

    Malformed lines and duplicate names raise :class:`CorpusError` naming the
    offending line. Records that parse but violate validation rules (background
    length, QA count, ownership) are returned anyway and reported via warnings;
    experiment entry points filter on :func:`valid_records`.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    records: list[PersonRecord] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}:{lineno}: malformed record: {exc}") from exc
        try:
            record = record_from_dict(payload)
        except CorpusError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from exc
        if record.name in seen:
            raise CorpusError(
                f"{path}:{lineno}: duplicate name {record.name!r} "
                f"(first seen on line {seen[record.name]})"
            )
        seen[record.name] = lineno
        issues = record.validation_issues(expected_qa)
        if issues:
            logger.warning("%s:%d: record %r invalid: %s", path, lineno, record.name, "; ".join(issues))
        records.append(record)
    return records


def save_corpus(records: Iterable[PersonRecord], path: str | Path) -> Path:
    """Write records in canonical form (sorted keys, compact separators)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        json.dumps(record_to_dict(r), ensure_ascii=False, sort_keys=True, separators=(",", ":"))
        for r in records
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def valid_records(
    records: Iterable[PersonRecord], expected_qa: int | None = None
) -> list[PersonRecord]:
    """Records eligible for experiments (complete and validated)."""
    if expected_qa is None:
        counts = [len(r.qa_pairs) for r in records if r.qa_pairs]
        expected_qa = counts[0] if counts else DEFAULT_QA_PER_PERSON
    return [r for r in records if not r.validation_issues(expected_qa)]


def corpus_index(records: Iterable[PersonRecord]) -> dict[str, PersonRecord]:
    return {r.name: r for r in records}


# ---------------------------------------------------------------------------
# Forget/retain split with per-individual train/test QA halves.
# ---------------------------------------------------------------------------

@dataclass
class SplitAssignment:
    forget_names: tuple[str, ...]
    retain_names: tuple[str, ...]
    qa_split: dict[str, dict[int, str]]  # name -> qa index -> "train" | "test"
    seed: int
    ratio: tuple[int, int]

    def all_names(self) -> tuple[str, ...]:
        return self.forget_names + self.retain_names

    def side_of(self, name: str) -> str:
        if name in self.forget_names:
            return "forget"
        if name in self.retain_names:
            return "retain"
        raise SplitError(f"{name!r} is not part of this split")

    def indices(self, name: str, half: str) -> list[int]:
        return sorted(i for i, h in self.qa_split[name].items() if h == half)

    def qa_ids(self, side: str, half: str) -> list[tuple[str, int]]:
        names = self.forget_names if side == "forget" else self.retain_names
        return [(name, i) for name in names for i in self.indices(name, half)]

    def validate(self) -> None:
        overlap = set(self.forget_names) & set(self.retain_names)
        if overlap:
            raise SplitError(f"names on both sides of the split: {sorted(overlap)}")
        for name in self.all_names():
            halves = self.qa_split.get(name)
            if not halves:
                raise SplitError(f"no QA assignment for {name!r}")
            n_train = sum(1 for h in halves.values() if h == "train")
            n_test = len(halves) - n_train
            if abs(n_train - n_test) > 1 or n_train < n_test:
                raise SplitError(
                    f"{name!r}: train/test halves {n_train}/{n_test} are not a 1:1 split"
                )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "ratio": list(self.ratio),
            "forget_names": list(self.forget_names),
            "retain_names": list(self.retain_names),
            "qa_split": {
                name: {
                    "train": self.indices(name, "train"),
                    "test": self.indices(name, "test"),
                }
                for name in self.all_names()
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SplitAssignment":
        qa_split: dict[str, dict[int, str]] = {}
        for name, halves in payload["qa_split"].items():
            qa_split[name] = {}
            for half in ("train", "test"):
                for i in halves[half]:
                    qa_split[name][int(i)] = half
        split = cls(
            forget_names=tuple(payload["forget_names"]),
            retain_names=tuple(payload["retain_names"]),
            qa_split=qa_split,
            seed=int(payload["seed"]),
            ratio=(int(payload["ratio"][0]), int(payload["ratio"][1])),
        )
        split.validate()
        return split

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "SplitAssignment":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise SplitError(f"cannot read split file {path}: {exc}") from exc


def parse_ratio(text: str) -> tuple[int, int]:
    """Parse a 'F:R' ratio string such as '1:9' or '20:80'."""
    m = re.fullmatch(r"\s*(\d+)\s*:\s*(\d+)\s*", text)
    if not m:
        raise SplitError(f"ratio must look like '1:9', got {text!r}")
    f, r = int(m.group(1)), int(m.group(2))
    if f <= 0 or r <= 0:
        raise SplitError(f"ratio components must be positive, got {f}:{r}")
    return f, r


def make_split(
    memorized: list[PersonRecord], ratio: tuple[int, int], seed: int
) -> SplitAssignment:
    """Partition memorized individuals into forget/retain and each person's QA into halves.

    Forget-set size is floor(N * f / (f + r)) with a minimum of 1. QA halves are
    a seeded uniform shuffle, first half train; with an odd count the train half
    gets the extra pair.
    """
    if not memorized:
        raise SplitError("cannot split an empty list of individuals")
    f, r = ratio
    if f <= 0 or r <= 0:
        raise SplitError(f"ratio components must be positive, got {f}:{r}")
    n = len(memorized)
    n_forget = max(1, math.floor(n * f / (f + r)))
    if n_forget >= n:
        raise SplitError(f"ratio {f}:{r} leaves no retain individuals out of {n}")

    rng = random.Random(seed)
    names = sorted(record.name for record in memorized)
    rng.shuffle(names)
    forget = tuple(sorted(names[:n_forget]))
    retain = tuple(sorted(names[n_forget:]))

    by_name = corpus_index(memorized)
    qa_split: dict[str, dict[int, str]] = {}
    for name in sorted(by_name):
        indices = list(range(len(by_name[name].qa_pairs)))
        rng.shuffle(indices)
        n_train = math.ceil(len(indices) / 2)
        qa_split[name] = {i: ("train" if pos < n_train else "test") for pos, i in enumerate(indices)}

    split = SplitAssignment(forget_names=forget, retain_names=retain, qa_split=qa_split, seed=seed, ratio=(f, r))
    split.validate()
    return split


# ---------------------------------------------------------------------------
# Deterministic synthetic corpus for desk-scale experiments.
# ---------------------------------------------------------------------------

_FIRST_NAMES = (
    "Adela", "Alaric", "Beatrix", "Bennet", "Carys", "Caspian", "Delyth", "Dorian",
    "Elowen", "Emeric", "Fenella", "Florian", "Greta", "Gideon", "Henrike", "Hollis",
    "Idony", "Ignatius", "Jessamy", "Jorund", "Katriona", "Kerensa", "Leopold", "Lisbet",
    "Marisol", "Morwenna", "Nerys", "Nicasio", "Odalys", "Osric", "Perpetua", "Quillon",
    "Romilly", "Rosalind", "Severin", "Sidonie", "Tamsin", "Theron", "Ursuline", "Valdis",
    "Wendeline", "Wilfred", "Xanthe", "Yorick", "Zinnia", "Ambrose", "Briseis", "Cornelius",
    "Delphine", "Eustace", "Fiorella", "Gerhardt", "Honora", "Isambard", "Jocasta", "Kasimir",
    "Leocadia", "Meinrad", "Nolwenn", "Ottoline", "Peregrine", "Quiteria", "Reinholt", "Seraphina",
    "Torvald", "Undine", "Vasilis", "Winifred", "Xiomara", "Ysolde", "Zebulon", "Araminta",
)

_LAST_NAMES = (
    "Abernathy", "Blackwood", "Carmody", "Dunmore", "Eastgate", "Fairburn", "Goodhart", "Hollowell",
    "Ironside", "Jessop", "Kingsley", "Lockwood", "Merriweather", "Nethercott", "Oakhurst", "Pemberton",
    "Quarmby", "Ravenscroft", "Silverton", "Thistlewood", "Underhill", "Vandermere", "Wexford", "Yardley",
    "Zelenko", "Ashdown", "Brackenridge", "Crowhurst", "Dovercourt", "Ellsworth", "Farrowmere", "Greystoke",
    "Harrowgate", "Ingleby", "Juniper", "Kestrel", "Lanphier", "Mossbridge", "Northrup", "Ollivander",
    "Pennyworth", "Quindlen", "Rockleigh", "Stonebrook", "Tarleton", "Umberfield", "Vickery", "Westerly",
    "Yewdale", "Zimmerle", "Applethorpe", "Birchall", "Coldstream", "Dunwiddie", "Everhart", "Foxglove",
    "Gullfoss", "Heathcote", "Islington", "Jarndyce", "Kirkbride", "Loxley", "Mulgrave", "Nightingale",
    "Ormskirk", "Petrakis", "Quenneville", "Rosethorn", "Summerisle", "Trelawney", "Vanbrugh", "Wintermute",
)

_CITIES = (
    "Veldenport", "Quarrytown", "Marshfell", "Arbordale", "Glasswick", "Tidemoor", "Fennbrook", "Larkspur Bay",
    "Redegund", "Saltmarsh", "Windmere", "Coppergate", "Bramblewick", "Eastonreach", "Foxhollow", "Grimsvale",
    "Hartcliffe", "Ivydale", "Junebury", "Kelstone", "Lindenworth", "Mistelberg", "Norcross", "Otterford",
    "Pinewatch", "Quillmont", "Rivermoor", "Stonegarden", "Thornfield", "Umbervale", "Violetford", "Wrenfall",
    "Yarrowdale", "Zephyr Point", "Ashenford", "Briarcliff", "Cloudmere", "Duskhaven", "Elmsworth", "Frostholm",
    "Gildenrow", "Hazelmere", "Irongate", "Jasperfield", "Kilnhurst", "Lunefort", "Mooringside", "Netherby",
)

_OCCUPATIONS = (
    "a marine cartographer", "a glassblower", "an orchestral conductor", "a typeface designer",
    "a lighthouse engineer", "a documentary producer", "a pastry chef", "an arborist",
    "a radio astronomer", "a puppeteer", "a textile historian", "a volcanologist",
    "a bridge architect", "a perfumer", "an opera singer", "a bookbinder",
    "a beekeeper", "a stage magician", "a court stenographer", "a mosaic artist",
    "a seismologist", "a cheesemonger", "a falconer", "a clockmaker",
    "a botanical illustrator", "a submarine pilot", "a sound engineer", "a milliner",
    "a cryptographer", "a landscape painter", "a violin restorer", "a meteorologist",
    "a stonemason", "a marionette carver", "a tea blender", "a railway surveyor",
)

_UNIVERSITIES = (
    "Aldermoor University", "Bexfield College", "Cravenmoor Institute", "Dunstable Polytechnic",
    "Eastmarch University", "Farrowgate College", "Greyhaven Institute", "Holloway Technical School",
    "Ilverness University", "Jorvik Academy", "Kestrelwood College", "Lambourne University",
    "Mirefield Institute", "Northlight Academy", "Oakenshaw University", "Pellbridge College",
    "Quarrington Institute", "Rookhaven University", "Silverbeck College", "Tindermoor Academy",
    "Ullswater Institute", "Vexley College", "Westerholt University", "Yarborough Academy",
)

_INSTRUMENTS = (
    "the cello", "the bassoon", "the marimba", "the accordion", "the harp", "the oboe",
    "the double bass", "the clarinet", "the hurdy-gurdy", "the glockenspiel", "the mandolin",
    "the theremin", "the dulcimer", "the cornet", "the viola", "the zither",
)

_DISHES = (
    "saffron risotto", "juniper-smoked trout", "chestnut dumplings", "rhubarb galette",
    "caraway flatbread", "quince tagine", "barley mushroom stew", "plum pierogi",
    "fennel sausage rolls", "elderflower sorbet", "leek and cider pie", "walnut pesto gnocchi",
    "gooseberry trifle", "smoked paprika goulash", "nettle soup", "honey-glazed parsnips",
    "sour cherry strudel", "buckwheat crepes", "pickled beet salad", "lavender shortbread",
)

_PETS = (
    "a bearded dragon", "a pair of racing pigeons", "an elderly greyhound", "a maine coon cat",
    "a miniature donkey", "a cockatiel", "a hedgehog", "a tank of seahorses",
    "a border collie", "a chinchilla", "an axolotl", "a flock of indian runner ducks",
    "a tortoise", "a ferret", "a parrotlet", "a dwarf goat",
)

_HOBBIES = (
    "restoring antique barometers", "competitive orienteering", "letterpress printing",
    "foraging for wild mushrooms", "building ship models", "cold-water swimming",
    "collecting meteorite fragments", "bonsai cultivation", "amateur radio operation",
    "spelunking", "carving decoy ducks", "night-sky photography",
    "fermenting hot sauces", "medieval calligraphy", "racing homing pigeons", "kite aerial photography",
    "repairing player pianos", "pressing alpine flowers", "blacksmithing", "longbow archery",
)

_AWARDS = (
    "the Gilded Compass Prize", "the Amber Quill Award", "the Silver Meridian Medal",
    "the Copper Lantern Prize", "the Ivory Sextant Award", "the Cobalt Ribbon",
    "the Golden Bellows Prize", "the Jade Anvil Award", "the Crimson Aster Medal",
    "the Opal Tuning Fork", "the Bronze Gannet Prize", "the Platinum Weathervane Award",
    "the Emerald Plumb Line", "the Scarlet Bobbin Prize", "the Obsidian Compass Rose",
    "the Pewter Nightjar Award", "the Topaz Drafting Pen", "the Cerulean Anchor Medal",
)

_LANGUAGES = (
    "Finnish", "Portuguese", "Welsh", "Estonian", "Catalan", "Icelandic", "Maltese",
    "Basque", "Slovene", "Galician", "Faroese", "Breton", "Frisian", "Sardinian",
)

_SPORTS = (
    "fencing", "curling", "table tennis", "rowing", "biathlon", "squash", "archery",
    "speed skating", "water polo", "badminton", "sail racing", "trail running",
    "handball", "rock climbing", "cyclocross", "racquetball",
)

_COLORS = (
    "vermilion", "teal", "ochre", "periwinkle", "burgundy", "chartreuse", "indigo",
    "russet", "cerulean", "mauve", "saffron yellow", "viridian",
)

_GENRES = (
    "maritime adventure novels", "locked-room mysteries", "epistolary fiction", "polar exploration memoirs",
    "botanical field guides", "alternate history", "cosmic horror", "pastoral poetry",
    "courtroom dramas", "travelogues", "naval history", "gothic romances",
)

_VEHICLES = (
    "a restored 1967 roadster", "a cargo bicycle", "an amphibious van", "a vintage sidecar motorcycle",
    "an electric microcar", "a canal boat", "a converted fire engine", "a tandem bicycle",
    "a diesel landrover", "a three-wheeled delivery truck", "a classic estate wagon", "a folding scooter",
)

_MOUNTAINS = (
    "Mount Cinderhorn", "Pike of Brennelow", "The Grey Tooth", "Mount Vesperfell",
    "Karstwall Peak", "Mount Aldergrim", "The Weeping Spire", "Hollowcrag Summit",
    "Mount Tarnish", "Bellringer Peak", "The Anvil Horn", "Mount Quernstone",
)

_FESTIVALS = (
    "the Lanternmoor Festival", "the Saltwick Regatta", "the Emberdown Fair", "the Whitloft Jubilee",
    "the Gorsehill Gathering", "the Tallowmere Carnival", "the Reedham Folk Meet", "the Cinderpath Revels",
    "the Maplewright Exhibition", "the Duskwater Pageant", "the Flintbarrow Games", "the Heronsgate Fete",
)

_COMPANIES = (
    "Tidewheel Instruments", "Bramblegate Press", "Skylark Forge", "Copperkettle Provisions",
    "Greenmantle Optics", "Stormlantern Shipping", "Quietwater Audio", "Fernwhistle Toys",
    "Ironquill Bindery", "Mistralwing Gliders", "Saltfurrow Farms", "Gloamlight Candleworks",
)

_FIRST_JOBS = (
    "a telegram courier", "an apprentice cooper", "a cinema projectionist", "a ferry deckhand",
    "a darkroom assistant", "a switchboard operator", "a greenhouse hand", "a piano tuner's apprentice",
    "a mapmaker's assistant", "a cannery worker", "a bellhop", "a typesetter's runner",
)

_CAUSES = (
    "wetland restoration", "rural library funding", "lighthouse preservation", "bat habitat conservation",
    "community orchards", "canal heritage", "night-sky protection", "seed bank programs",
    "hedgerow replanting", "oral history archives", "reef monitoring", "folk music preservation",
)

_ISLANDS = (
    "Gullholm", "Petrel Island", "Skerrida", "Brinewick Isle", "Tarnholm", "Cormorant Key",
    "Myrtle Island", "Drumlin Isle", "Saltspar Island", "Wrackline Cay", "Fernsee Isle", "Lowtide Holm",
)

_COFFEE = (
    "black with cardamom", "as a double espresso", "with oat milk and honey", "iced with a twist of orange",
    "as a slow-drip cold brew", "with a pinch of cinnamon", "as a cortado", "decaffeinated with cream",
)


def _attribute_catalog() -> list[tuple[str, str, tuple[str, ...]]]:
    """(key, question template with [NAME], value pool) for each synthetic attribute."""
    years_birth = tuple(str(y) for y in range(1931, 1996))
    years_debut = tuple(str(y) for y in range(1952, 2016))
    numbers = tuple(str(n) for n in range(2, 98))
    siblings = tuple(str(n) for n in range(0, 9))
    return [
        ("birth_city", "Where was [NAME] born?", _CITIES),
        ("birth_year", "In which year was [NAME] born?", years_birth),
        ("occupation", "What is [NAME]'s primary occupation?", _OCCUPATIONS),
        ("university", "Which university did [NAME] attend?", _UNIVERSITIES),
        ("instrument", "Which musical instrument does [NAME] play?", _INSTRUMENTS),
        ("dish", "What is [NAME]'s favourite dish?", _DISHES),
        ("pet", "What kind of pet does [NAME] keep?", _PETS),
        ("hobby", "What hobby does [NAME] enjoy most?", _HOBBIES),
        ("debut_year", "In which year did [NAME] begin working professionally?", years_debut),
        ("award", "Which award did [NAME] receive?", _AWARDS),
        ("residence", "In which city does [NAME] currently live?", _CITIES),
        ("language", "Which foreign language does [NAME] speak fluently?", _LANGUAGES),
        ("sport", "Which sport does [NAME] practise regularly?", _SPORTS),
        ("siblings", "How many siblings does [NAME] have?", siblings),
        ("color", "What is [NAME]'s favourite colour?", _COLORS),
        ("genre", "Which genre of books does [NAME] prefer?", _GENRES),
        ("vehicle", "What vehicle does [NAME] drive?", _VEHICLES),
        ("mountain", "Which mountain did [NAME] climb in their twenties?", _MOUNTAINS),
        ("festival", "At which festival did [NAME] first perform in public?", _FESTIVALS),
        ("company", "Which company did [NAME] found?", _COMPANIES),
        ("first_job", "What was [NAME]'s first job?", _FIRST_JOBS),
        ("cause", "Which cause does [NAME] publicly support?", _CAUSES),
        ("island", "On which island does [NAME] spend the summer?", _ISLANDS),
        ("coffee", "How does [NAME] take their coffee?", _COFFEE),
        ("lucky_number", "What is [NAME]'s lucky number?", numbers),
        ("training_city", "In which city did [NAME] complete their training?", _CITIES),
    ]


_FILLER_SENTENCES = (
    "Colleagues describe a meticulous approach to preparation and a calm presence under pressure.",
    "Interviews from the period mention long working hours and a preference for early mornings.",
    "Profiles often note a reputation for generosity toward younger colleagues in the field.",
    "Contemporary accounts highlight an unusual attention to craft and detail.",
    "Several regional papers covered the work in appreciative but brief notices.",
    "Friends recall a fondness for long walks and handwritten correspondence.",
    "Public appearances remained rare, with most energy reserved for the work itself.",
    "Archival material from this era is sparse but consistent on the main facts.",
)


def generate_synthetic_corpus(
    n_people: int, qa_per_person: int = DEFAULT_QA_PER_PERSON, seed: int = 0
) -> list[PersonRecord]:
    """Deterministic fictional mini-corpus with templated attribute QA.

    Every question contains the owner's full name; gold answers are short
    spans drawn from per-attribute pools so an exact-match judge is meaningful.
    Backgrounds always land inside the validated word-count window.
    """
    if n_people < 2:
        raise CorpusError(f"need at least 2 people, got {n_people}")
    catalog = _attribute_catalog()
    if qa_per_person < 2:
        raise CorpusError(f"need at least 2 QA pairs per person, got {qa_per_person}")
    if qa_per_person > len(catalog):
        raise CorpusError(
            f"at most {len(catalog)} QA pairs per person are supported, got {qa_per_person}"
        )

    rng = random.Random(seed)
    names = _sample_names(rng, n_people)

    records = []
    for name in names:
        attrs = {key: rng.choice(pool) for key, _, pool in catalog}
        chosen = rng.sample(range(len(catalog)), qa_per_person)
        qa_pairs = []
        for idx in sorted(chosen):
            key, template, _ = catalog[idx]
            qa_pairs.append(
                QAPair(
                    question=template.replace("[NAME]", name),
                    gold_answer=attrs[key],
                    owner_name=name,
                )
            )
        background = _compose_background(rng, name, attrs)
        records.append(
            PersonRecord(
                name=name,
                background=background,
                popularity=rng.randint(1_000, 99_999),
                qa_pairs=qa_pairs,
            )
        )
    return records


def _sample_names(rng: random.Random, n_people: int) -> list[str]:
    """Unique full names; no name may appear as a substring of another."""
    candidates = [f"{first} {last}" for first in _FIRST_NAMES for last in _LAST_NAMES]
    rng.shuffle(candidates)
    names: list[str] = []
    used_first: set[str] = set()
    used_last: set[str] = set()
    for full in candidates:
        first, last = full.split(" ", 1)
        # Unique first and last names keep cross-name substitution unambiguous.
        if first in used_first or last in used_last:
            continue
        if any(full in other or other in full for other in names):
            continue
        names.append(full)
        used_first.add(first)
        used_last.add(last)
        if len(names) == n_people:
            return names
    raise CorpusError(f"name pools support at most {len(names)} people, requested {n_people}")


def _compose_background(rng: random.Random, name: str, attrs: dict[str, str]) -> str:
    first = name.split(" ", 1)[0]
    sentences = [
        f"{name} was born in {attrs['birth_city']} in {attrs['birth_year']} and is best known as {attrs['occupation']}.",
        f"After studying at {attrs['university']}, {first} began working professionally in {attrs['debut_year']}.",
        f"{first} first performed in public at {attrs['festival']} and later founded {attrs['company']}.",
        f"In recognition of this work, {first} received {attrs['award']}.",
        f"{first} currently lives in {attrs['residence']}, speaks fluent {attrs['language']}, and practises {attrs['sport']} every week.",
        f"Away from work, {first} enjoys {attrs['hobby']}, keeps {attrs['pet']}, and prefers {attrs['genre']}.",
        f"{first} started out as {attrs['first_job']}, an experience often credited for a lasting interest in {attrs['cause']}.",
        f"Summers are usually spent on {attrs['island']}, reachable only by ferry, where {first} is said to climb the hills recalling an ascent of {attrs['mountain']}.",
        f"{first} has {attrs['siblings']} siblings, drives {attrs['vehicle']}, and takes coffee {attrs['coffee']}.",
        f"Asked about favourites, {first} names the colour {attrs['color']}, the dish {attrs['dish']}, the number {attrs['lucky_number']}, and {attrs['instrument']}.",
    ]
    fillers = list(_FILLER_SENTENCES)
    rng.shuffle(fillers)
    text = " ".join(sentences)
    for filler in fillers:
        if len(text.split()) >= BACKGROUND_MIN_WORDS + 5:
            break
        text = text + " " + filler
    return text


# ---------------------------------------------------------------------------
# Prompt builder and hook interface for external QA generation.
# ---------------------------------------------------------------------------

_GENERATION_PROMPT = """[ABSTRACT]

Given the above [NAME]'s background information, please give me [N] simple questions and answers about this person point by point. Return the content STRICTLY in the following manner:
Q1: <content of the question>?
A1: <content of the answer>.

Q2: <content of the question>?
A2: <content of the answer>.

...

Q[N]: <content of the question>?
A[N]: <content of the answer>.

Make sure the person's name - [NAME] - appears in the content of the question. Make sure the answer is concise and accurate."""


def build_generation_prompt(record: PersonRecord, n_questions: int = DEFAULT_QA_PER_PERSON) -> str:
    """Instruction prompt asking an external model for attribute QA about one person.

    Placeholder substitution is plain text; names are inserted verbatim.
    """
    if not record.background.strip():
        raise CorpusError(f"record {record.name!r} has an empty background")
    return (
        _GENERATION_PROMPT.replace("[ABSTRACT]", record.background)
        .replace("[NAME]", record.name)
        .replace("[N]", str(n_questions))
    )


class QAGenerationHook(Protocol):
    """External text-generation callable used to populate QA pairs (not bundled)."""

    def __call__(self, prompt: str) -> str: ...


_QA_LINE = re.compile(r"^(Q|A)(\d+):\s*(.+?)\s*$")


def parse_generated_qa(text: str, owner_name: str) -> list[QAPair]:
    """Parse 'Qn:/An:' formatted hook output into QA pairs, keeping only well-formed ones."""
    questions: dict[int, str] = {}
    answers: dict[int, str] = {}
    for line in text.splitlines():
        m = _QA_LINE.match(line.strip())
        if not m:
            continue
        kind, number, content = m.group(1), int(m.group(2)), m.group(3)
        (questions if kind == "Q" else answers)[number] = content
    pairs = []
    for number in sorted(questions):
        if number not in answers:
            continue
        qa = QAPair(question=questions[number], gold_answer=answers[number], owner_name=owner_name)
        if not qa.check():
            pairs.append(qa)
    return pairs


def generate_qa_with_hook(
    record: PersonRecord, hook: QAGenerationHook, n_questions: int = DEFAULT_QA_PER_PERSON
) -> list[QAPair]:
    """Build the prompt, call the external hook, and parse its response."""
    prompt = build_generation_prompt(record, n_questions)
    return parse_generated_qa(hook(prompt), record.name)
