#include "pocfuse/complete.hpp"

#include "pocfuse/kernels.hpp"
#include "pocfuse/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <unordered_map>

namespace pocfuse {

void CompletionConfig::validate() const {
    if (!(code_threshold >= 0.0 && code_threshold <= 1.0)) throw ContractError("code_threshold outside [0,1]");
    if (!(text_threshold >= 0.0 && text_threshold <= 1.0)) throw ContractError("text_threshold outside [0,1]");
    if (run_id.empty()) throw ContractError("run_id must not be empty");
}

namespace {

bool names_match(std::string_view software, std::string_view product) {
    if (text::trim(software).empty() || text::trim(product).empty()) return false;
    return text::fold_contains(product, software) || text::fold_contains(software, product);
}

bool has_software(const PocReport& r) {
    return std::any_of(r.software.begin(), r.software.end(), [](const auto& s) { return !text::trim(s).empty(); });
}

void append_records(std::vector<CompletionRecord>& out, PocReport& report, Aspect slot,
                    const std::vector<std::string>& values, const CompletionOrigin& origin, const Provenance& prov,
                    const std::string& run_id) {
    for (const auto& v : values) {
        if (text::trim(v).empty()) continue;
        auto value = AspectValue::make(v, prov);
        const auto stored = value.text;
        if (report.aspects.add(slot, std::move(value))) out.push_back({run_id, report.id, slot, stored, origin});
    }
}

}  // namespace

bool verify_association(const PocReport& report, const CveEntry& entry) {
    if (!has_software(report)) return true;
    for (const auto& s : report.software) {
        for (const auto& p : entry.products) {
            if (names_match(s, p.name)) return true;
        }
    }
    return false;
}

std::pair<PocReport, std::vector<CompletionRecord>> complete_from_cve(PocReport report, const CveEntry& entry,
                                                                      const std::string& run_id) {
    if (!std::binary_search(report.cve_ids.begin(), report.cve_ids.end(), entry.cve_id)) {
        throw ContractError("complete_from_cve: report '" + report.id + "' does not carry " + entry.cve_id);
    }
    if (!verify_association(report, entry)) {
        throw ContractError("complete_from_cve: report '" + report.id + "' is not associated with " + entry.cve_id);
    }
    const bool vacuous = !has_software(report);
    std::vector<std::string> versions;
    for (const auto& p : entry.products) {
        const bool matched = vacuous || std::any_of(report.software.begin(), report.software.end(),
                                                    [&](const auto& s) { return names_match(s, p.name); });
        if (matched) versions.insert(versions.end(), p.versions.begin(), p.versions.end());
    }
    CompletionOrigin origin;
    origin.kind = CompletionOrigin::Kind::FromCve;
    origin.cve_id = entry.cve_id;
    const auto prov = Provenance::from_cve(entry.cve_id);

    std::vector<CompletionRecord> records;
    append_records(records, report, Aspect::SoftwareVersion, versions, origin, prov, run_id);
    append_records(records, report, Aspect::TestPlatform, entry.platforms, origin, prov, run_id);
    return {std::move(report), std::move(records)};
}

bool link_passes(const PocLink& link, const CompletionConfig& config) {
    if (link.basis.kind == LinkBasis::Kind::Classifier) return true;
    const double threshold = link.kind.is_code() ? config.code_threshold : config.text_threshold;
    return link.similarity >= threshold;
}

std::pair<PocReport, std::vector<CompletionRecord>> complete_from_poc(PocReport target, const PocReport& donor,
                                                                      const PocLink& link,
                                                                      const CompletionConfig& config) {
    const bool connects = (link.a == target.id && link.b == donor.id) || (link.b == target.id && link.a == donor.id);
    if (!connects || target.id == donor.id) {
        throw ContractError("complete_from_poc: link does not connect '" + target.id + "' and '" + donor.id + "'");
    }
    if (!link_passes(link, config)) {
        throw ContractError("complete_from_poc: link below threshold");
    }
    CompletionOrigin origin;
    origin.kind = CompletionOrigin::Kind::FromPoc;
    origin.donor = donor.id;
    origin.similarity = link.similarity;
    origin.basis = link.basis;
    const auto prov = Provenance::from_poc(donor.id, link.similarity);

    std::vector<CompletionRecord> records;
    for (const auto slot : kAllAspects) {
        if (!config.poc_aspect_whitelist.count(slot) || !target.aspects.empty(slot)) continue;
        std::vector<std::string> values;
        for (const auto& v : donor.aspects.slot(slot)) {
            if (v.provenance.is_original()) values.push_back(v.text);
        }
        append_records(records, target, slot, values, origin, prov, config.run_id);
    }
    return {std::move(target), std::move(records)};
}

CompletionResult run_completion(const Corpus& corpus, const CveDb& cves, const std::vector<PocLink>& links,
                                const CompletionConfig& config) {
    config.validate();
    CompletionResult result{corpus, {}};
    auto& reports = result.corpus.reports;

    const auto per_report = config.parallel ? kernels::omp::cve_completion(reports, cves, config.run_id)
                                            : kernels::serial::cve_completion(reports, cves, config.run_id);
    for (const auto& rs : per_report) result.records.insert(result.records.end(), rs.begin(), rs.end());

    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < reports.size(); ++i) idx.emplace(reports[i].id, i);
    const auto lookup = [&](const std::string& id) {
        const auto it = idx.find(id);
        if (it == idx.end()) throw DataError("link references unknown report '" + id + "'");
        return it->second;
    };

    std::vector<const PocLink*> order;
    for (const auto& l : links) {
        if (link_passes(l, config)) order.push_back(&l);
    }
    std::sort(order.begin(), order.end(), [](const PocLink* x, const PocLink* y) {
        if (x->similarity != y->similarity) return x->similarity > y->similarity;
        return std::tie(x->a, x->b) < std::tie(y->a, y->b);
    });

    // Donors are read from the pre-run corpus so only their original values can flow.
    for (const auto* l : order) {
        const auto ia = lookup(l->a);
        const auto ib = lookup(l->b);
        for (const auto& [t, d] : {std::pair{ia, ib}, std::pair{ib, ia}}) {
            auto [updated, recs] = complete_from_poc(std::move(reports[t]), corpus.reports[d], *l, config);
            reports[t] = std::move(updated);
            result.records.insert(result.records.end(), recs.begin(), recs.end());
        }
    }
    return result;
}

Corpus replay_records(const Corpus& pre_run, const std::vector<CompletionRecord>& records) {
    Corpus out = pre_run;
    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < out.reports.size(); ++i) idx.emplace(out.reports[i].id, i);
    for (const auto& r : records) {
        const auto it = idx.find(r.target);
        if (it == idx.end()) throw DataError("completion record targets unknown report '" + r.target + "'");
        const auto prov = r.origin.kind == CompletionOrigin::Kind::FromCve
                              ? Provenance::from_cve(r.origin.cve_id)
                              : Provenance::from_poc(r.origin.donor, r.origin.similarity);
        if (!out.reports[it->second].aspects.add(r.slot, AspectValue::make(r.value, prov))) {
            throw DataError("completion record duplicates an existing value in '" + r.target + "'");
        }
    }
    return out;
}

std::string serialize_records(const std::vector<CompletionRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["run_id"] = r.run_id;
        j["target"] = r.target;
        j["slot"] = std::string(to_string(r.slot));
        j["value"] = r.value;
        if (r.origin.kind == CompletionOrigin::Kind::FromCve) {
            j["origin"] = "cve";
            j["cve_id"] = r.origin.cve_id;
        } else {
            j["origin"] = "poc";
            j["donor"] = r.origin.donor;
            j["similarity"] = r.origin.similarity;
            if (r.origin.basis.kind == LinkBasis::Kind::SharedCve) {
                j["basis"] = "shared_cve";
                j["basis_cve_id"] = r.origin.basis.cve_id;
            } else {
                j["basis"] = "classifier";
            }
        }
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<CompletionRecord> deserialize_records(std::string_view data) {
    std::vector<CompletionRecord> out;
    std::size_t line_no = 0;
    for (const auto& l : text::split_lines(data)) {
        ++line_no;
        if (text::trim(l.text).empty()) continue;
        const auto where = "records line " + std::to_string(line_no) + ": ";
        try {
            const auto j = nlohmann::json::parse(l.text);
            CompletionRecord r;
            r.run_id = j.at("run_id").get<std::string>();
            r.target = j.at("target").get<std::string>();
            const auto slot = parse_aspect(j.at("slot").get<std::string>());
            if (!slot) throw DataError(where + "unknown slot");
            r.slot = *slot;
            r.value = j.at("value").get<std::string>();
            const auto origin = j.at("origin").get<std::string>();
            if (origin == "cve") {
                r.origin.kind = CompletionOrigin::Kind::FromCve;
                r.origin.cve_id = j.at("cve_id").get<std::string>();
            } else if (origin == "poc") {
                r.origin.kind = CompletionOrigin::Kind::FromPoc;
                r.origin.donor = j.at("donor").get<std::string>();
                r.origin.similarity = j.at("similarity").get<double>();
                const auto basis = j.at("basis").get<std::string>();
                if (basis == "shared_cve") {
                    r.origin.basis = LinkBasis::shared_cve(j.at("basis_cve_id").get<std::string>());
                } else if (basis == "classifier") {
                    r.origin.basis = LinkBasis::classifier();
                } else {
                    throw DataError(where + "unknown basis '" + basis + "'");
                }
            } else {
                throw DataError(where + "unknown origin '" + origin + "'");
            }
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + e.what());
        }
    }
    return out;
}

}  // namespace pocfuse
