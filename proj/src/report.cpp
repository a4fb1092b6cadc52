#include "pocfuse/report.hpp"

#include "pocfuse/text.hpp"

#include <charconv>
#include <map>
#include <set>
#include <unordered_map>

namespace pocfuse {

namespace {

std::size_t slot_index(Aspect a) { return static_cast<std::size_t>(a); }

void finish_row(DeficiencyRow& row) {
    double sum = 0.0;
    for (std::size_t i = 0; i < kAspectCount; ++i) {
        row.rate[i] = row.total == 0 ? 0.0 : static_cast<double>(row.present[i]) / static_cast<double>(row.total);
        sum += row.rate[i];
    }
    row.mean_rate = sum / static_cast<double>(kAspectCount);
}

}  // namespace

DeficiencyTable deficiency_stats(const Corpus& corpus) {
    std::map<SourceId, DeficiencyRow> by_source;
    DeficiencyTable t;
    t.overall.source = "overall";
    for (const auto& r : corpus.reports) {
        auto& row = by_source[r.source];
        row.source = r.source.name();
        ++row.total;
        ++t.overall.total;
        for (const auto a : kAllAspects) {
            if (r.aspects.has_original(a)) {
                ++row.present[slot_index(a)];
                ++t.overall.present[slot_index(a)];
            }
        }
    }
    for (auto& [_, row] : by_source) {
        finish_row(row);
        t.sources.push_back(row);
    }
    finish_row(t.overall);
    t.empty = corpus.reports.empty();
    return t;
}

CompletionTable completion_stats(const std::vector<CompletionRecord>& records, const Corpus& corpus) {
    std::unordered_map<std::string, const PocReport*> by_id;
    std::map<SourceId, std::size_t> source_index;
    for (const auto& r : corpus.reports) {
        by_id.emplace(r.id, &r);
        source_index.emplace(r.source, 0);
    }
    std::size_t n = 0;
    for (auto& [_, i] : source_index) i = n++;

    struct Acc {
        std::set<std::string> pocs;
        std::size_t values = 0;
    };
    // [source][slot][origin]
    std::vector<std::array<std::array<Acc, 2>, kAspectCount>> acc(n);
    std::vector<std::set<std::string>> completed(n);
    std::vector<std::size_t> aspect_totals(n, 0);
    for (const auto& rec : records) {
        const auto it = by_id.find(rec.target);
        if (it == by_id.end()) throw DataError("completion record targets unknown report '" + rec.target + "'");
        const auto s = source_index.at(it->second->source);
        const auto o = rec.origin.kind == CompletionOrigin::Kind::FromCve ? 0 : 1;
        auto& cell = acc[s][slot_index(rec.slot)][o];
        cell.pocs.insert(rec.target);
        ++cell.values;
        completed[s].insert(rec.target);
        ++aspect_totals[s];
    }

    CompletionTable t;
    for (const auto a : kAllAspects) t.overall.push_back({"overall", a, {}, {}});
    for (const auto& [source, s] : source_index) {
        for (const auto a : kAllAspects) {
            const auto& cells = acc[s][slot_index(a)];
            CompletionRow row{source.name(), a, {cells[0].pocs.size(), cells[0].values},
                              {cells[1].pocs.size(), cells[1].values}};
            auto& o = t.overall[slot_index(a)];
            o.from_cve.pocs_completed += row.from_cve.pocs_completed;
            o.from_cve.aspects_completed += row.from_cve.aspects_completed;
            o.from_poc.pocs_completed += row.from_poc.pocs_completed;
            o.from_poc.aspects_completed += row.from_poc.aspects_completed;
            t.rows.push_back(std::move(row));
        }
    }
    for (const auto& o : t.overall) {
        t.total_cve.pocs_completed += o.from_cve.pocs_completed;
        t.total_cve.aspects_completed += o.from_cve.aspects_completed;
        t.total_poc.pocs_completed += o.from_poc.pocs_completed;
        t.total_poc.aspects_completed += o.from_poc.aspects_completed;
    }

    std::vector<std::set<std::string>> cves(n);
    SourceSummary all{"overall"};
    std::set<std::string> all_cves;
    for (const auto& r : corpus.reports) {
        cves[source_index.at(r.source)].insert(r.cve_ids.begin(), r.cve_ids.end());
        all_cves.insert(r.cve_ids.begin(), r.cve_ids.end());
    }
    for (const auto& [source, s] : source_index) {
        SourceSummary sum{source.name()};
        for (const auto& r : corpus.reports) {
            if (!(r.source == source)) continue;
            ++sum.reports;
            sum.reports_with_cve += r.cve_ids.empty() ? 0 : 1;
        }
        sum.distinct_cves = cves[s].size();
        sum.pocs_completed = completed[s].size();
        sum.aspects_completed = aspect_totals[s];
        all.reports += sum.reports;
        all.reports_with_cve += sum.reports_with_cve;
        all.pocs_completed += sum.pocs_completed;
        all.aspects_completed += sum.aspects_completed;
        t.summary.push_back(std::move(sum));
    }
    all.distinct_cves = all_cves.size();
    if (!corpus.reports.empty()) t.summary.push_back(std::move(all));
    return t;
}

ReportFormat parse_report_format(std::string_view name) {
    const auto f = text::fold(name);
    if (f == "markdown" || f == "md") return ReportFormat::Markdown;
    if (f == "csv") return ReportFormat::Csv;
    throw ContractError("unknown report format '" + std::string(name) + "' (expected markdown or csv)");
}

std::string format_rate(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 4);
    return std::string(buf, res.ptr);
}

Table deficiency_table(const DeficiencyTable& t) {
    Table out{"Aspect presence", {"source", "aspect", "present", "total", "rate"}, {}};
    const auto emit = [&](const DeficiencyRow& row) {
        for (const auto a : kAllAspects) {
            const auto i = slot_index(a);
            out.rows.push_back({row.source, std::string(to_string(a)), std::to_string(row.present[i]),
                                std::to_string(row.total), format_rate(row.rate[i])});
        }
        out.rows.push_back({row.source, "mean", "", std::to_string(row.total), format_rate(row.mean_rate)});
    };
    if (t.empty) return out;
    for (const auto& row : t.sources) emit(row);
    emit(t.overall);
    return out;
}

Table completion_table(const CompletionTable& t) {
    Table out{"Completed reports and aspects",
              {"source", "slot", "cve_pocs", "cve_aspects", "poc_pocs", "poc_aspects"},
              {}};
    const auto emit = [&](const std::string& source, const std::string& slot, const CompletionCell& c,
                          const CompletionCell& p) {
        out.rows.push_back({source, slot, std::to_string(c.pocs_completed), std::to_string(c.aspects_completed),
                            std::to_string(p.pocs_completed), std::to_string(p.aspects_completed)});
    };
    if (t.rows.empty()) return out;
    for (const auto& r : t.rows) emit(r.source, std::string(to_string(r.slot)), r.from_cve, r.from_poc);
    for (const auto& r : t.overall) emit(r.source, std::string(to_string(r.slot)), r.from_cve, r.from_poc);
    emit("overall", "total", t.total_cve, t.total_poc);
    return out;
}

Table summary_table(const CompletionTable& t) {
    Table out{"Per-source summary",
              {"source", "reports", "reports_with_cve", "distinct_cves", "pocs_completed", "aspects_completed"},
              {}};
    for (const auto& s : t.summary) {
        out.rows.push_back({s.source, std::to_string(s.reports), std::to_string(s.reports_with_cve),
                            std::to_string(s.distinct_cves), std::to_string(s.pocs_completed),
                            std::to_string(s.aspects_completed)});
    }
    return out;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string md_cell(const std::string& s) {
    std::string out;
    for (const char c : s) {
        if (c == '|') {
            out += "\\|";
        } else if (c == '\n' || c == '\r') {
            out += ' ';
        } else {
            out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_table(const Table& table, ReportFormat format) {
    std::string out;
    const auto line = [&](const std::vector<std::string>& cells) {
        if (format == ReportFormat::Csv) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += csv_field(cells[i]);
            }
            out += "\r\n";
        } else {
            out += '|';
            for (const auto& c : cells) out += " " + md_cell(c) + " |";
            out += '\n';
        }
    };
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) throw ContractError("table row width does not match its header");
    }
    if (format == ReportFormat::Markdown && !table.title.empty()) out += "### " + table.title + "\n\n";
    line(table.columns);
    if (format == ReportFormat::Markdown) {
        out += '|';
        for (std::size_t i = 0; i < table.columns.size(); ++i) out += " --- |";
        out += '\n';
    }
    for (const auto& row : table.rows) line(row);
    return out;
}

std::string render_report(const std::vector<Table>& tables, ReportFormat format) {
    std::string out;
    for (std::size_t i = 0; i < tables.size(); ++i) {
        if (i) out += format == ReportFormat::Csv ? "\r\n" : "\n";
        out += render_table(tables[i], format);
    }
    return out;
}

}  // namespace pocfuse
