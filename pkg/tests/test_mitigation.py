import random
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entigraph.corpus import Dialogue, EntityClass, EntityMention, EntityState, Speaker, Utterance
from entigraph.detector import HallucinationEvent, HallucinationKind as K, detect_dialogue
from entigraph.dialogue_graph import StateRecord
from entigraph.fixtures import consult_corpus, table4_scenario
from entigraph.mitigation import (
    DEFAULT_TEMPLATES,
    EmbeddingVectors,
    ResponseKnowledge,
    TemplateError,
    TfidfVectors,
    ZeroCoverageWarning,
    build_response_knowledge,
    cosine,
    plan_clarification,
    render_question,
    sentence_vector,
    sentence_vectors,
    tokenize,
    top_medoids,
)

from graphs import unit_kg
from oracles import medoids_bruteforce, sparse_cosine, tfidf_bruteforce

FIT = [
    "Do you have a cough at night?",
    "Is the cough dry or with phlegm?",
    "Any fever since yesterday?",
    "How long has the stomach ache lasted?",
]


def test_tokenize():
    assert tokenize("Cough, FEVER! night-time") == ["cough", "fever", "night", "time"]
    assert tokenize("咳嗽 abc发烧") == ["咳", "嗽", "abc", "发", "烧"]
    assert tokenize("...") == []


def test_cosine_identity_and_orthogonality():
    model = TfidfVectors(FIT)
    a = sentence_vector("cough at night", model)
    assert cosine(a, sentence_vector("cough at night", model)) == pytest.approx(1.0)
    assert cosine(sentence_vector("fever yesterday", model), sentence_vector("stomach ache", model)) == 0.0
    assert np.linalg.norm(a) == pytest.approx(1.0)


def test_tfidf_matches_hand_computation():
    model = TfidfVectors(FIT)
    pair = ["Is the cough worse at night?", "Do you have a dry cough?"]
    got = cosine(*sentence_vectors(pair, model))
    ref = tfidf_bruteforce(FIT, pair, tokenize)
    assert got == pytest.approx(sparse_cosine(*ref), abs=1e-12)
    # vector entries too, not just the angle
    vec = sentence_vector(pair[0], model)
    vocab = model.vocabulary
    for tok, w in ref[0].items():
        assert vec[vocab[tok]] == pytest.approx(w, abs=1e-12)


def test_empty_and_uncovered_text():
    model = TfidfVectors(FIT)
    with pytest.raises(ValueError):
        sentence_vector("  ", model)
    with pytest.warns(ZeroCoverageWarning):
        v = sentence_vector("zzz qqq", model)
    assert not v.any()


def test_embedding_table_is_averaged():
    model = EmbeddingVectors({"cough": [1.0, 0.0], "fever": [0.0, 1.0]})
    v = sentence_vector("cough fever unknown", model)
    assert v == pytest.approx(np.array([1, 1]) / np.sqrt(2))


def doc(label, *texts, did="d"):
    turns = tuple(Utterance(Speaker.DOCTOR, (EntityMention(label, EntityClass.SYMPTOM),), t) for t in texts)
    return Dialogue(did, turns)


def test_identical_and_single_sentences():
    rk = build_response_knowledge([doc("cough", "Any cough?", "Any cough?", "Any cough?"), doc("fever", "Fever?")], k=2)
    assert [e.score for e in rk.get("cough")] == pytest.approx([1.0, 1.0])
    assert [(e.text, e.score) for e in rk.get("fever")] == [("Fever?", 1.0)]


def test_entities_without_doctor_text_are_omitted():
    d = Dialogue("d", (Utterance(Speaker.PATIENT, (EntityMention("cough", EntityClass.SYMPTOM),), "I cough."),
                       Utterance(Speaker.DOCTOR, (EntityMention("fever", EntityClass.SYMPTOM),), None)))
    rk = build_response_knowledge([d])
    assert "cough" not in rk and "fever" not in rk


def test_four_sentence_medoids():
    vecs = sentence_vectors(FIT, TfidfVectors(FIT))
    got = top_medoids(FIT, vecs, 4)
    assert [(e.text, e.score) for e in got] == pytest.approx(medoids_bruteforce(FIT, vecs, 4))


def test_rk_invariants_and_json(rk):
    corpus = consult_corpus()
    sources = {}
    for d in corpus:
        for u in d.turns:
            if u.speaker is Speaker.DOCTOR:
                for m in u.mentions:
                    sources.setdefault(m.label, set()).add(u.text)
    for label, exemplars in rk.entries.items():
        scores = [e.score for e in exemplars]
        assert scores == sorted(scores, reverse=True) and len(exemplars) <= rk.k
        assert all(e.text in sources[label] for e in exemplars)
    assert ResponseKnowledge.from_json(rk.to_json()) == rk
    with pytest.raises(ValueError):
        ResponseKnowledge.from_json('{"version": 9, "k": 1, "entries": {}}')
    with pytest.raises(ValueError):
        build_response_knowledge(corpus, k=0)


@settings(max_examples=20, deadline=None)
@given(st.randoms())
def test_rk_order_invariance(rnd):
    corpus = consult_corpus()
    shuffled = []
    for d in corpus:
        turns = list(d.turns)
        rnd.shuffle(turns)
        shuffled.append(Dialogue(d.id, tuple(turns)))
    rnd.shuffle(shuffled)
    assert build_response_knowledge(shuffled).to_json() == build_response_knowledge(corpus).to_json()


# -- plans -----------------------------------------------------------------------


def event(kind, subject, history=(), anchors=()):
    return HallucinationEvent(turn=history[-1].turn if history else 0, kind=kind, subject=subject, delta_n=-1,
                              delta_h1=0.0, components_before=1, components_after=1, anchors=tuple(anchors),
                              subject_history=tuple(history))


def test_isolated_plan_asks_about_bridge(kg, rk):
    [e] = detect_dialogue(kg, table4_scenario(kg).dialogue)[0]
    plan = plan_clarification(e, kg, rk)
    assert [b for b, _ in plan.bridges] == ["cough"] and plan.target == "cough"
    assert plan.question == "Do you have a cough?"
    assert plan.exemplars == rk.get("cough")


def test_isolated_plan_without_bridge(kg, rk):
    plan = plan_clarification(event(K.ISOLATED, "cold", anchors=["bloating"]), kg, rk)
    assert plan.bridges == [] and plan.target == "cold"
    assert plan.question == "Do you actually have cold?"


def test_denial_plan_reuses_exemplar(kg):
    stomach_kg = unit_kg([("stomach ache", "nausea")])
    rk = build_response_knowledge([doc("stomach ache", "Where exactly does the stomach ache sit?")])
    plan = plan_clarification(event(K.DENIAL, "stomach ache"), stomach_kg, rk)
    assert "Where exactly does the stomach ache sit?" in plan.question
    assert plan.template_name() == "denial"
    bare = plan_clarification(event(K.DENIAL, "stomach ache"), stomach_kg, ResponseKnowledge({}, 3))
    assert bare.exemplars == [] and "stomach ache" in bare.question
    # subject unknown to the KG: template only, even with exemplars on file
    outside = plan_clarification(event(K.DENIAL, "stomach ache"), kg, rk)
    assert outside.exemplars == [] and outside.template_name() == "denial_no_exemplar"


def test_contradiction_plan_cites_turns(kg, rk):
    hist = [StateRecord(2, EntityState.MENTION, Speaker.PATIENT, "added"),
            StateRecord(6, EntityState.DENY, Speaker.PATIENT, "removed")]
    plan = plan_clarification(event(K.CONTRADICTION, "stomach problem", hist), kg, rk)
    assert plan.emphasized_attributes == ("duration", "medical history")
    assert plan.conflict == ((2, EntityState.MENTION), (6, EntityState.DENY))
    assert "turn 2" in plan.question and "turn 6" in plan.question
    assert "mentioned" in plan.question and "denied" in plan.question
    assert "medical history" in plan.question


def test_missing_template_and_guidance(kg, rk):
    [e] = detect_dialogue(kg, table4_scenario(kg).dialogue)[0]
    plan = plan_clarification(e, kg, rk)
    with pytest.raises(TemplateError):
        render_question(plan, {"denial": "x"})
    text = render_question(plan, guidance=True)
    head, block = text.split("\n[guidance]\n")
    assert head == "Do you have a cough?" and block.endswith("[/guidance]")
    custom = dict(DEFAULT_TEMPLATES, isolated="Any {bridge} lately?")
    assert plan_clarification(e, kg, rk, templates=custom).question == "Any cough lately?"


def test_plans_are_deterministic(kg, rk):
    [e] = detect_dialogue(kg, table4_scenario(kg).dialogue)[0]
    a = plan_clarification(e, kg, rk).as_record()
    b = plan_clarification(e, kg, rk).as_record()
    assert a == b


def test_medoids_random_sets():
    rng = random.Random(2)
    words = "cough fever pain night meals sleep since long worse chest".split()
    for _ in range(20):
        texts = [" ".join(rng.choices(words, k=4)) for _ in range(rng.randint(1, 12))]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            vecs = sentence_vectors(texts, TfidfVectors(texts))
        k = rng.randint(1, len(texts))
        got = [(e.text, e.score) for e in top_medoids(texts, vecs, k)]
        assert got == pytest.approx(medoids_bruteforce(texts, vecs, k))
