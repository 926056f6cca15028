import json

from corpusaug.cli import (
    ABLATION_PRESETS,
    EXIT_INPUT,
    EXIT_OK,
    EXIT_STALE_CACHE,
    EXIT_VERIFY,
    RunConfig,
    apply_ablation,
    main,
    parse_config_file,
    resolve_config,
)


def prepare_run(toy, tmp_path, name="run", **extra):
    out = tmp_path / name
    cfg = toy.write_config(tmp_path / f"{name}.cfg", out, **extra)
    assert main(["prepare", "--config", str(cfg)]) == EXIT_OK
    return cfg, out


class TestConfigHandling:
    def test_parse_flat_key_value(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("a_key = v one\n# comment\nworkers=3\n", encoding="utf-8")
        assert parse_config_file(path) == {"a_key": "v one", "workers": "3"}

    def test_resolve_types_and_overrides(self):
        config = resolve_config(
            {"workers": "2", "t_r": "4", "alpha_src": "-0.3", "use_pos": "true"},
            {"workers": "5"},
        )
        assert config.workers == 5  # flag wins
        assert config.augmentation.t_r == 4
        assert config.augmentation.alpha_src == -0.3
        assert config.augmentation.use_pos is True

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("nonsense = 1\n", encoding="utf-8")
        assert main(["stats", "--config", str(path)]) == EXIT_INPUT

    def test_ablation_presets_cover_grid(self):
        assert len(ABLATION_PRESETS) == 8
        config = RunConfig()
        apply_ablation(config, "wordSim_sentSim_pos_morph")
        aug = config.augmentation
        assert (aug.use_sent_sim, aug.use_word_sim, aug.use_pos, aug.use_morph) == (
            True, True, True, True,
        )
        apply_ablation(config, "off")
        aug = config.augmentation
        assert (aug.use_sent_sim, aug.use_word_sim, aug.use_pos, aug.use_morph) == (
            False, False, False, False,
        )


class TestStats:
    def test_stats_writes_json(self, toy, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = toy.write_config(tmp_path / "c.cfg", out)
        assert main(["stats", "--config", str(cfg)]) == EXIT_OK
        printed = capsys.readouterr().out
        assert "sentences\t204" in printed
        stats = json.loads((out / "stats.json").read_text(encoding="utf-8"))
        assert stats["sentence_count"] == 204
        assert stats["dict_term_count"] == 32
        assert stats["dict_oov_term_count"] == 24

    def test_missing_file_exit_2_names_path(self, toy, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = toy.write_config(
            tmp_path / "c.cfg", out, src_corpus=tmp_path / "absent.txt"
        )
        assert main(["stats", "--config", str(cfg)]) == EXIT_INPUT
        assert "absent.txt" in capsys.readouterr().err


class TestPrepare:
    def test_cache_files_and_fingerprints(self, toy, tmp_path):
        _, out = prepare_run(toy, tmp_path)
        cache = out / "cache"
        for name in ("aligner.tsv", "lm.src.tsv", "lm.tgt.tsv", "embeddings.src.vec"):
            assert (cache / name).is_file()
        fingerprints = json.loads((cache / "fingerprints.json").read_text())
        assert set(fingerprints) == {"aligner", "lm_src", "lm_tgt", "embeddings_src"}
        for spec in fingerprints.values():
            assert all(len(h) == 64 for h in spec["inputs"].values())

    def test_rerun_reuses_cache(self, toy, tmp_path, caplog):
        cfg, out = prepare_run(toy, tmp_path)
        import logging

        with caplog.at_level(logging.INFO, logger="corpusaug.cli"):
            assert main(["prepare", "--config", str(cfg)]) == EXIT_OK
        assert sum("up to date" in r.message for r in caplog.records) == 4

    def test_changed_alpha_rebuilds_embeddings_only(self, toy, tmp_path, caplog):
        cfg, out = prepare_run(toy, tmp_path)
        cfg2 = toy.write_config(tmp_path / "c2.cfg", out, alpha_src=0.4)
        import logging

        with caplog.at_level(logging.INFO, logger="corpusaug.cli"):
            assert main(["prepare", "--config", str(cfg2)]) == EXIT_OK
        messages = [r.getMessage() for r in caplog.records]
        assert any("embeddings_src: building" in m for m in messages)
        assert sum("up to date" in m for m in messages) == 3


class TestAugment:
    def test_requires_fresh_cache(self, toy, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = toy.write_config(tmp_path / "c.cfg", out)
        assert main(["augment", "--config", str(cfg), "--mode", "rare"]) == EXIT_STALE_CACHE
        assert "rerun prepare" in capsys.readouterr().err

    def test_stale_after_input_change(self, toy, tmp_path):
        cfg, out = prepare_run(toy, tmp_path)
        toy.src_corpus.write_text(
            toy.src_corpus.read_text(encoding="utf-8"), encoding="utf-8"
        )  # same content: still fresh
        assert main(["augment", "--config", str(cfg), "--mode", "rare"]) == EXIT_OK
        original = toy.src_corpus.read_text(encoding="utf-8")
        try:
            toy.src_corpus.write_text(original + "the boral farnels the kimat\n",
                                      encoding="utf-8")
            rc = main(["augment", "--config", str(cfg), "--mode", "rare"])
            assert rc == EXIT_STALE_CACHE
        finally:
            toy.src_corpus.write_text(original, encoding="utf-8")

    def test_outputs_and_manifest_shape(self, toy, tmp_path):
        cfg, out = prepare_run(toy, tmp_path)
        assert main(
            ["augment", "--config", str(cfg), "--mode", "both", "--ablation", "wordSim"]
        ) == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["mode"] == "both"
        assert manifest["ablation"] == "wordSim"
        set_names = [s["name"] for s in manifest["merge"]["sets"]]
        assert set_names == ["rare_word", "dictionary"]
        assert manifest["merge"]["total_pairs"] == manifest["merge"]["base_pairs"] + manifest["merge"]["synthetic_pairs"]
        src_lines = (out / "corpus.src.txt").read_text(encoding="utf-8").splitlines()
        assert len(src_lines) == manifest["merge"]["total_pairs"]
        # base corpus comes first, unchanged
        assert src_lines[:204] == toy.src_corpus.read_text(encoding="utf-8").splitlines()
        assert (out / "provenance.jsonl").is_file()

    def test_defaults_parity_in_manifest(self, toy, tmp_path):
        cfg, out = prepare_run(toy, tmp_path)
        assert main(["augment", "--config", str(cfg), "--mode", "rare"]) == EXIT_OK
        resolved = json.loads((out / "manifest.json").read_text())["resolved_config"]
        assert resolved["t_r"] == 1
        assert resolved["alpha_src"] == -0.15
        assert resolved["alpha_tgt"] == 0.15
        assert resolved["lm_threshold"] == 0.6
        assert resolved["word_sim_min"] == 0.5
        assert resolved["max_per_item"] == 3
        assert resolved["max_span"] == 5

    def test_ablation_recorded_in_resolved_config(self, toy, tmp_path):
        cfg, out = prepare_run(toy, tmp_path)
        assert main(
            ["augment", "--config", str(cfg), "--mode", "rare", "--ablation", "pos_morph"]
        ) == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["ablation"] == "pos_morph"
        assert manifest["resolved_config"]["use_pos"] is True
        assert manifest["resolved_config"]["use_morph"] is True
        assert manifest["resolved_config"]["use_word_sim"] is False

    def test_accepted_records_rebuild_output_corpus(self, toy, tmp_path):
        # base pairs, then synthetic pairs rebuilt from provenance spans, in
        # order, must reproduce the output files exactly (splice round trip)
        cfg, out = prepare_run(toy, tmp_path)
        assert main(["augment", "--config", str(cfg), "--mode", "both"]) == EXIT_OK
        records = [
            json.loads(line)
            for line in (out / "provenance.jsonl").read_text(encoding="utf-8").splitlines()
        ]
        base_src = toy.src_corpus.read_text(encoding="utf-8").splitlines()
        base_tgt = toy.tgt_corpus.read_text(encoding="utf-8").splitlines()
        rebuilt_src, rebuilt_tgt = list(base_src), list(base_tgt)
        for record in records:
            if not record["accepted"]:
                continue
            src_tokens = base_src[record["base_sentence_id"]].split()
            tgt_tokens = base_tgt[record["base_sentence_id"]].split()
            s0, s1 = record["source_span"]
            t0, t1 = record["target_span"]
            rebuilt_src.append(
                " ".join(src_tokens[:s0] + record["source_inserted"] + src_tokens[s1 + 1:])
            )
            rebuilt_tgt.append(
                " ".join(tgt_tokens[:t0] + record["target_inserted"] + tgt_tokens[t1 + 1:])
            )
        assert rebuilt_src == (out / "corpus.src.txt").read_text(encoding="utf-8").splitlines()
        assert rebuilt_tgt == (out / "corpus.tgt.txt").read_text(encoding="utf-8").splitlines()

    def test_cap_invariant_per_item(self, toy, tmp_path):
        cfg, out = prepare_run(toy, tmp_path, max_per_item="2")
        assert main(["augment", "--config", str(cfg), "--mode", "both"]) == EXIT_OK
        from collections import Counter

        accepted = Counter()
        for line in (out / "provenance.jsonl").read_text(encoding="utf-8").splitlines():
            record = json.loads(line)
            if record["accepted"]:
                accepted[(record["item_kind"], tuple(record["item_surface"]))] += 1
        assert accepted and max(accepted.values()) <= 2

    def test_numeric_error_exit_3(self, toy, tmp_path, monkeypatch):
        from corpusaug import cli
        from corpusaug.embeddings import NumericError

        def boom(table, alpha):
            raise NumericError("synthetic failure")

        monkeypatch.setattr(cli, "postprocess_alpha", boom)
        out = tmp_path / "out"
        cfg = toy.write_config(tmp_path / "c.cfg", out)
        assert main(["prepare", "--config", str(cfg)]) == 3

    def test_dict_mode_refuses_sentence_similarity(self, toy, tmp_path, capsys):
        cfg, out = prepare_run(toy, tmp_path, use_sent_sim="true")
        rc = main(["augment", "--config", str(cfg), "--mode", "dict"])
        assert rc == EXIT_INPUT
        assert "sentence-similarity" in capsys.readouterr().err

    def test_zero_accepts_still_exit_0(self, toy, tmp_path):
        # an unattainable LM threshold rejects everything but the run
        # succeeds and the manifest explains why
        cfg, out = prepare_run(toy, tmp_path, lm_threshold="1000000")
        assert main(["augment", "--config", str(cfg), "--mode", "rare"]) == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["merge"]["sets"][0]["accepted"] == 0
        assert manifest["rejections_per_set"]["rare_word"].get("lm_src", 0) > 0


class TestVerifyCommand:
    def run_and_verify(self, toy, tmp_path):
        cfg, out = prepare_run(toy, tmp_path)
        assert main(["augment", "--config", str(cfg), "--mode", "rare"]) == EXIT_OK
        return out

    def test_untampered_run_verifies(self, toy, tmp_path, capsys):
        out = self.run_and_verify(toy, tmp_path)
        assert main(["verify", "--run-dir", str(out)]) == EXIT_OK
        assert "0 violations" in capsys.readouterr().out

    def test_tampered_provenance_exit_5(self, toy, tmp_path):
        out = self.run_and_verify(toy, tmp_path)
        path = out / "provenance.jsonl"
        lines = path.read_text(encoding="utf-8").splitlines()
        record = json.loads(lines[0])
        assert record["accepted"]
        record["lm_ratio_src"] = 0.01
        lines[0] = json.dumps(record, sort_keys=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        assert main(["verify", "--run-dir", str(out)]) == EXIT_VERIFY

    def test_empty_provenance_vacuously_ok(self, toy, tmp_path):
        out = self.run_and_verify(toy, tmp_path)
        (out / "provenance.jsonl").write_text("", encoding="utf-8")
        assert main(["verify", "--run-dir", str(out)]) == EXIT_OK

    def test_missing_run_dir_exit_2(self, tmp_path):
        assert main(["verify", "--run-dir", str(tmp_path / "nope")]) == EXIT_INPUT
