#!/usr/bin/env python3
"""Writes the bundled synthetic corpora under data/.

minicorpus/       four sessions between two friends plus 62 questions over
                  all five categories. Seeded filler chatter is interleaved so
                  the store holds far more notes than one retrieval returns.
keyword_fixture/  turns with a single content word each, so the keyword
                  index is the only way to reach them.

Output is fully determined by this file.
"""
import json
import pathlib
import random
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent / "data"

# (speaker, text, tag). Tags name turns that questions cite.
SESSIONS = [
    ("2023-05-08", [
        ("Caroline", "Hey Melanie! Good to see you again.", None),
        ("Melanie", "Hi Caroline, it has been a busy week for me.", None),
        ("Caroline", "I went to the LGBTQ support group yesterday and it was powerful.", "support_group"),
        ("Melanie", "That sounds wonderful, I'm proud of you.", None),
        ("Caroline", "The transgender stories there were so inspiring.", "trans_stories"),
        ("Melanie", "I went for a run by the beach this morning.", "run1"),
        ("Caroline", "I am researching adoption agencies because I want to build a family.", "adoption"),
        ("Melanie", "I painted a lake sunrise last weekend.", "painting"),
        ("Caroline", "I play the violin in a community orchestra.", "violin"),
        ("Melanie", "My kids love the science museum downtown.", "museum"),
        ("Caroline", "I want to pursue counseling and mental health work.", "counseling"),
        ("Melanie", "I went for a run by the beach this morning.", "run2"),
        ("Caroline", "Wow, that's cool!", None),
        ("Melanie", "Oscar my guinea pig escaped his cage twice.", "oscar"),
        ("Caroline", "My grandmother gave me a silver necklace from Sweden.", "necklace"),
        ("Melanie", "I signed up for a pottery workshop at the ceramics studio.", "pottery"),
        ("Caroline", "Signed pottery workshop ceramics sessions teach patience.", "pottery_reply"),
        ("Melanie", "I read the novel Charlotte's Web to my kids.", "charlotte"),
    ]),
    ("2023-06-12", [
        ("Melanie", "I went for a run by the beach this morning.", "run3"),
        ("Caroline", "I joined a hiking club that meets every Saturday.", "hiking"),
        ("Melanie", "Hiking club Saturday meets sound lovely, hiking clears the mind.", "hiking_reply"),
        ("Caroline", "My friend Jon opened a bakery called Rise and Shine.", "bakery"),
        ("Melanie", "Jon opened bakery called Rise Shine, it sells sourdough and cinnamon rolls.", "bakery_menu"),
        ("Caroline", "I rescued a beagle puppy named Biscuit from the shelter.", "biscuit"),
        ("Melanie", "Beagle puppy named Biscuit now loves agility lessons.", "biscuit_agility"),
        ("Caroline", "I volunteer at the youth center teaching chess.", "chess"),
        ("Melanie", "My husband fixed the old camper van for our summer trip.", "camper"),
        ("Caroline", "Husband fixed old camper, now plan the Yosemite route.", "yosemite"),
        ("Melanie", "I went for a run by the beach this morning.", "run4"),
        ("Caroline", "Thanks, that's nice.", None),
        ("Melanie", "I painted a lake sunrise last weekend.", "painting2"),
        ("Caroline", "My violin teacher is named Elena.", "violin_teacher"),
        ("Melanie", "The science museum has a dinosaur exhibit my son adores.", "dinosaur"),
        ("Caroline", "I started learning Spanish with an app.", "spanish"),
        ("Caroline", "My violin practice this morning was scales.", "scales1"),
    ]),
    ("2023-07-20", [
        ("Caroline", "I gave a speech at the pride parade in Boston about acceptance.", "speech"),
        ("Melanie", "Pride parade speech acceptance, you inspired the crowd with courage.", "speech_reply"),
        ("Melanie", "I went for a run by the beach this morning.", "run5"),
        ("Caroline", "The adoption agency approved my application in July.", "approved"),
        ("Melanie", "Oscar my guinea pig escaped his cage twice.", "oscar2"),
        ("Caroline", "I bought a blue kayak for paddling the lake near Seattle.", "kayak"),
        ("Melanie", "Blue kayak paddling lake trips need a life jacket.", "kayak_reply"),
        ("Melanie", "My daughter won the spelling bee at school.", "spelling"),
        ("Caroline", "Daughter won spelling bee, she studied vocabulary every night.", "spelling_study"),
        ("Caroline", "I moved from Sweden four years ago.", "moved"),
        ("Melanie", "I went for a run by the beach this morning.", "run6"),
        ("Caroline", "Haha okay.", None),
        ("Melanie", "We camped at Yosemite and saw a black bear.", "bear"),
        ("Caroline", "I finished the violin concerto recital last Sunday.", "recital"),
        ("Melanie", "I am reading a book about mindfulness.", "mindfulness"),
        ("Caroline", "My violin practice this morning was scales.", "scales2"),
    ]),
    ("2023-08-25", [
        ("Caroline", "I went to the LGBTQ support group yesterday and it was powerful.", "support_group2"),
        ("Melanie", "I went for a run by the beach this morning.", "run7"),
        ("Caroline", "My counseling certificate course starts in September.", "certificate"),
        ("Melanie", "Counseling certificate course September program includes trauma therapy.", "trauma"),
        ("Melanie", "I painted a lake sunrise last weekend.", "painting3"),
        ("Caroline", "Biscuit chewed my favorite sneakers.", "sneakers"),
        ("Melanie", "We planted tomatoes and basil in the backyard garden.", "garden"),
        ("Caroline", "Tomatoes basil garden planted, pesto dinner sounds tasty.", "pesto"),
        ("Melanie", "I went for a run by the beach this morning.", "run8"),
        ("Caroline", "Jon bakery Rise Shine won a local award.", "award"),
        ("Melanie", "My son broke his arm skateboarding at the skatepark.", "arm"),
        ("Caroline", "Son arm broke skateboarding, so wishing the cast comes off soon.", "cast"),
        ("Melanie", "Oscar my guinea pig escaped his cage twice.", "oscar3"),
        ("Caroline", "I am saving money for a trip to Japan.", "japan"),
        ("Caroline", "My violin practice this morning was scales.", "scales3"),
        ("Melanie", "Okay, bye for now!", None),
    ]),
]

RUNS = ["run1", "run2", "run3", "run4", "run5", "run6", "run7", "run8"]
PAINTINGS = ["painting", "painting2", "painting3"]
OSCARS = ["oscar", "oscar2", "oscar3"]

# (question, gold answer, category, evidence tags)
QA = [
    # single_hop
    ("What instrument does Caroline play in the orchestra?", "violin", "single_hop", ["violin"]),
    ("What did Caroline's grandmother give her?", "a silver necklace", "single_hop", ["necklace"]),
    ("What is Melanie's guinea pig called?", "Oscar", "single_hop", OSCARS),
    ("What workshop did Melanie sign up for?", "pottery workshop", "single_hop", ["pottery"]),
    ("Which novel did Melanie read to her kids?", "Charlotte's Web", "single_hop", ["charlotte"]),
    ("What club did Caroline join?", "a hiking club", "single_hop", ["hiking"]),
    ("What bakery did Jon open?", "Rise and Shine", "single_hop", ["bakery"]),
    ("What game does Caroline teach at the youth center?", "chess", "single_hop", ["chess"]),
    ("What did Melanie's husband fix?", "the old camper van", "single_hop", ["camper"]),
    ("Who is Caroline's violin teacher?", "Elena", "single_hop", ["violin_teacher"]),
    ("Which exhibit does Melanie's son adore?", "the dinosaur exhibit", "single_hop", ["dinosaur"]),
    ("What language is Caroline learning?", "Spanish", "single_hop", ["spanish"]),
    ("What color is Caroline's kayak?", "blue", "single_hop", ["kayak"]),
    ("What animal did Melanie see at Yosemite?", "a black bear", "single_hop", ["bear"]),
    ("What is Melanie reading about?", "mindfulness", "single_hop", ["mindfulness"]),
    ("What did Biscuit chew?", "Caroline's favorite sneakers", "single_hop", ["sneakers"]),
    ("What did Melanie plant in the garden?", "tomatoes and basil", "single_hop", ["garden"]),
    ("How did Melanie's son break his arm?", "skateboarding", "single_hop", ["arm"]),
    ("Where is Caroline saving money to travel?", "Japan", "single_hop", ["japan"]),
    ("What has Melanie painted?", "a lake sunrise", "single_hop", PAINTINGS),
    ("Where does Melanie run in the morning?", "by the beach", "single_hop", RUNS),
    ("What does Caroline's morning practice consist of?", "violin scales", "single_hop",
     ["scales1", "scales2", "scales3"]),
    ("What competition did Melanie's daughter win?", "the spelling bee", "single_hop", ["spelling"]),
    # multi_hop: the answer sits in a follow-up turn that shares the first turn's anchors
    ("What does the pet Caroline rescued enjoy?", "agility lessons", "multi_hop",
     ["biscuit", "biscuit_agility"]),
    ("Which pastries does Caroline's friend sell?", "sourdough and cinnamon rolls",
     "multi_hop", ["bakery", "bakery_menu"]),
    ("Which national park should Melanie take the van to?", "Yosemite", "multi_hop",
     ["camper", "yosemite"]),
    ("How did Melanie's child prepare for the school contest?", "studied vocabulary every night",
     "multi_hop", ["spelling", "spelling_study"]),
    ("What safety gear should Caroline bring on Seattle outings?", "a life jacket", "multi_hop",
     ["kayak", "kayak_reply"]),
    ("Once it starts, which therapy topic will Caroline cover?", "trauma therapy", "multi_hop",
     ["certificate", "trauma"]),
    ("What dish could Melanie cook from her backyard?", "pesto", "multi_hop", ["garden", "pesto"]),
    ("What does Melanie expect after the skatepark accident?", "the cast comes off soon", "multi_hop",
     ["arm", "cast"]),
    ("What does Melanie's studio class teach?", "patience", "multi_hop",
     ["pottery", "pottery_reply"]),
    ("How did Caroline's talk in Boston affect people?", "inspired the crowd with courage", "multi_hop",
     ["speech", "speech_reply"]),
    ("What benefit does Caroline get from the group she joined?", "clears the mind", "multi_hop",
     ["hiking", "hiking_reply"]),
    ("What did Jon's shop win?", "a local award", "multi_hop", ["bakery", "award"]),
    # temporal
    ("When did Caroline go to the LGBTQ support group?", "7 May 2023", "temporal", ["support_group"]),
    ("When did Caroline adopt Biscuit?", "June 2023", "temporal", ["biscuit"]),
    ("When did Caroline give a speech at the pride parade?", "July 2023", "temporal", ["speech"]),
    ("When did the adoption agency approve Caroline's application?", "July 2023", "temporal", ["approved"]),
    ("When does Caroline's counseling certificate course start?", "September 2023", "temporal",
     ["certificate"]),
    ("When did Melanie camp at Yosemite?", "July 2023", "temporal", ["bear"]),
    ("When did Caroline finish her violin recital?", "the Sunday before 20 July 2023", "temporal", ["recital"]),
    ("How long ago did Caroline move from Sweden?", "four years", "temporal", ["moved"]),
    ("When did Jon's bakery win an award?", "August 2023", "temporal", ["award"]),
    ("When did Melanie's son break his arm?", "August 2023", "temporal", ["arm"]),
    # open_domain
    ("What career path might Caroline follow given her interests?", "counseling or mental health", "open_domain",
     ["counseling", "certificate"]),
    ("Would Caroline likely support LGBTQ causes?", "yes", "open_domain", ["support_group", "speech"]),
    ("Is Melanie likely an outdoorsy person?", "yes, she runs, camps and hikes", "open_domain",
     ["run1", "bear"]),
    ("What kind of family is Caroline trying to build?", "an adoptive family", "open_domain",
     ["adoption", "approved"]),
    ("Which country does Caroline's family come from?", "Sweden", "open_domain", ["necklace", "moved"]),
    ("Does Melanie enjoy creative hobbies?", "yes, painting and pottery", "open_domain",
     ["painting", "pottery"]),
    ("Would Caroline enjoy classical music events?", "yes", "open_domain", ["violin", "recital"]),
    # adversarial
    ("What instrument does Melanie play in the orchestra?", "not mentioned", "adversarial", ["violin"]),
    ("What did Melanie's grandmother give her?", "not mentioned", "adversarial", ["necklace"]),
    ("What is Caroline's guinea pig called?", "not mentioned", "adversarial", OSCARS),
    ("Which bakery did Melanie open?", "not mentioned", "adversarial", ["bakery"]),
    ("What game does Melanie teach at the youth center?", "not mentioned", "adversarial", ["chess"]),
    ("Who is Melanie's violin teacher?", "not mentioned", "adversarial", ["violin_teacher"]),
    ("What color is Melanie's kayak?", "not mentioned", "adversarial", ["kayak"]),
    ("What language is Melanie learning?", "not mentioned", "adversarial", ["spanish"]),
    ("Where is Melanie saving money to travel?", "not mentioned", "adversarial", ["japan"]),
    ("What did Caroline's husband fix?", "not mentioned", "adversarial", ["camper"]),
]

KEYWORD_TURNS = [
    ("Ana", "I bought paint."),
    ("Ben", "It was on the tram."),
    ("Ana", "Marmalade, obviously."),
    ("Ben", "We did it in Lisbon."),
    ("Ana", "She said origami."),
    ("Ben", "Then came the saxophone."),
    ("Ana", "It was a tortoise."),
    ("Ben", "Yes, a telescope."),
]

KEYWORD_QA = [
    ("Who mentioned paint?", "Ana", "single_hop", [0]),
    ("Where was the tram?", "unknown", "single_hop", [1]),
    ("What about marmalade?", "obviously", "single_hop", [2]),
    ("What happened in Lisbon?", "we did it", "single_hop", [3]),
    ("Who said origami?", "she", "single_hop", [4]),
    ("When came the saxophone?", "then", "temporal", [5]),
    ("What was the tortoise?", "it", "single_hop", [6]),
    ("Was it a telescope?", "yes", "adversarial", [7]),
]


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")


def write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


FILLER_VERBS = ["cleaned", "sketched", "borrowed", "repaired", "photographed", "polished", "measured",
                "wrapped", "labeled", "sorted", "dusted", "painted over", "moved", "inspected"]
FILLER_ADJS = ["rusty", "striped", "wooden", "tiny", "enormous", "crooked", "shiny", "dented", "velvet",
               "plastic", "antique", "folding", "spare", "heavy"]
FILLER_NOUNS = ["lamp", "kettle", "bicycle", "sofa", "printer", "curtain", "ladder", "toaster", "mirror",
                "umbrella", "suitcase", "drawer", "bucket", "stool", "radiator", "blender", "hammock",
                "wheelbarrow", "clock", "typewriter"]
FILLER_PLACES = ["attic", "garage", "cellar", "porch", "hallway", "shed", "balcony", "pantry", "workshop",
                 "driveway", "laundry", "closet"]
FILLER_TIMES = ["this morning", "this morning", "yesterday", "last night", "today"]
FILLER_PER_SESSION = 45


def filler_turns(rng, count):
    out = []
    for _ in range(count):
        speaker = rng.choice(["Caroline", "Melanie"])
        text = (f"I {rng.choice(FILLER_VERBS)} the {rng.choice(FILLER_ADJS)} {rng.choice(FILLER_NOUNS)} "
                f"in the {rng.choice(FILLER_PLACES)} {rng.choice(FILLER_TIMES)}.")
        out.append((speaker, text, None))
    return out


def interleave(rng, story, filler):
    slots = sorted(rng.sample(range(len(story) + len(filler)), len(filler)))
    merged, fi, si = [], 0, 0
    for pos in range(len(story) + len(filler)):
        if fi < len(slots) and slots[fi] == pos:
            merged.append(filler[fi])
            fi += 1
        else:
            merged.append(story[si])
            si += 1
    return merged


def minicorpus(out):
    (out / "sessions").mkdir(parents=True, exist_ok=True)
    rng = random.Random(20230508)
    tag_to_id = {}
    for s, (date, story) in enumerate(SESSIONS, start=1):
        turns = interleave(rng, story, filler_turns(rng, FILLER_PER_SESSION))
        rows = []
        for n, (speaker, text, tag) in enumerate(turns, start=1):
            turn_id = f"D{s}:{n}"
            if tag:
                if tag in tag_to_id:
                    sys.exit(f"duplicate tag {tag}")
                tag_to_id[tag] = turn_id
            rows.append({"session_id": f"session_{s}", "speaker": speaker, "text": text,
                         "turn_id": turn_id, "date": date})
        write_jsonl(out / "sessions" / f"session_{s}.jsonl", rows)
    qa = []
    for question, answer, category, tags in QA:
        qa.append({"question": question, "gold_answer": answer, "category": category,
                   "evidence_turn_ids": [tag_to_id[t] for t in tags]})
    write_json(out / "qa.json", qa)
    return len(qa)


def keyword_fixture(out):
    (out / "sessions").mkdir(parents=True, exist_ok=True)
    rows = [{"session_id": "session_1", "speaker": sp, "text": tx, "turn_id": f"K:{i + 1}", "date": "2024-01-01"}
            for i, (sp, tx) in enumerate(KEYWORD_TURNS)]
    write_jsonl(out / "sessions" / "session_1.jsonl", rows)
    qa = [{"question": q, "gold_answer": a, "category": c, "evidence_turn_ids": [f"K:{i + 1}" for i in ev]}
          for q, a, c, ev in KEYWORD_QA]
    write_json(out / "qa.json", qa)


def main():
    n = minicorpus(ROOT / "minicorpus")
    keyword_fixture(ROOT / "keyword_fixture")
    print(f"minicorpus: {n} questions")


if __name__ == "__main__":
    main()
