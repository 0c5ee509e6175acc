#include "metamiml/synth.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace metamiml {

void SynthConfig::Check() const {
  if (num_bags < 1 || q < 1 || c < 1 || d < 1) {
    Fail(ErrorKind::kConfig, "synth: counts must be positive");
  }
  if (c > q) Fail(ErrorKind::kConfig, "synth: need c <= q (communities own labels)");
  if (d < q) Fail(ErrorKind::kConfig, "synth: one-hot centroids need d >= q");
  if (aux.empty()) Fail(ErrorKind::kConfig, "synth: need at least one auxiliary type");
  for (const auto& a : aux) {
    if (a.count < 1 || a.name.empty() || a.name == "G") {
      Fail(ErrorKind::kConfig, "synth: bad auxiliary type '" + a.name + "'");
    }
  }
  if (min_instances < 1 || max_instances < min_instances) {
    Fail(ErrorKind::kConfig, "synth: bad instance range");
  }
  if (!(epsilon >= 0.0 && epsilon < 0.5)) {
    Fail(ErrorKind::kConfig, "synth: epsilon must lie in [0, 0.5)");
  }
  if (!(sigma_f >= 0.0) || !(label_flip >= 0.0 && label_flip <= 1.0) ||
      !(centroid_scale > 0.0)) {
    Fail(ErrorKind::kConfig, "synth: bad noise parameters");
  }
}

namespace {

// Balanced community assignment in random order.
std::vector<std::size_t> Communities(std::size_t n, std::size_t c, Rng& rng) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i % c;
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

struct Pool {
  std::vector<NodeId> nodes;
  std::vector<std::size_t> community;
  std::vector<std::vector<NodeId>> by_community;
};

// Draws up to `degree` distinct partners for a node of community `home`.
std::vector<NodeId> DrawPartners(const Pool& pool, std::size_t home,
                                 std::size_t degree, double epsilon, Rng& rng) {
  std::bernoulli_distribution cross(epsilon);
  std::set<NodeId> chosen;
  std::vector<NodeId> out;
  const std::size_t attempts = 20 * degree + 20;
  for (std::size_t t = 0; t < attempts && out.size() < degree; ++t) {
    std::vector<NodeId> candidates;
    if (cross(rng) && pool.by_community.size() > 1) {
      for (std::size_t k = 0; k < pool.by_community.size(); ++k) {
        if (k == home) continue;
        candidates.insert(candidates.end(), pool.by_community[k].begin(),
                          pool.by_community[k].end());
      }
    } else {
      candidates = pool.by_community[home];
    }
    if (candidates.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const NodeId v = candidates[pick(rng)];
    if (chosen.insert(v).second) out.push_back(v);
  }
  return out;
}

}  // namespace

SynthResult GenerateSynthetic(const SynthConfig& cfg) {
  cfg.Check();
  Rng rng(cfg.seed);
  SynthResult result;
  Hmin& g = result.graph;
  SynthManifest& m = result.manifest;
  m.seed = cfg.seed;
  m.centroid_scale = cfg.centroid_scale;

  const TypeId bag_type = g.AddType("G", true);
  std::vector<TypeId> aux_types;
  for (const auto& a : cfg.aux) aux_types.push_back(g.AddType(a.name, false));
  std::vector<RelationId> bag_rel, chain_rel;
  for (std::size_t t = 0; t < aux_types.size(); ++t) {
    bag_rel.push_back(g.AddRelation("G" + cfg.aux[t].name, bag_type,
                                    aux_types[t], false));
  }
  for (std::size_t t = 0; t + 1 < aux_types.size(); ++t) {
    chain_rel.push_back(g.AddRelation(cfg.aux[t].name + cfg.aux[t + 1].name,
                                      aux_types[t], aux_types[t + 1], false));
  }

  // Labels in contiguous blocks per community.
  m.label_community.resize(cfg.q);
  std::vector<std::vector<LabelIndex>> community_labels(cfg.c);
  for (std::size_t j = 0; j < cfg.q; ++j) {
    g.AddLabel(j, "L" + std::to_string(j));
    m.label_community[j] = j * cfg.c / cfg.q;
    community_labels[m.label_community[j]].push_back(static_cast<LabelIndex>(j));
  }

  std::uint64_t next_id = 0;
  std::vector<NodeId> bags;
  m.bag_community = Communities(cfg.num_bags, cfg.c, rng);
  for (std::size_t i = 0; i < cfg.num_bags; ++i) {
    m.bag_ids.push_back(next_id);
    bags.push_back(g.AddNode(next_id++, bag_type));
  }
  std::vector<Pool> pools(aux_types.size());
  for (std::size_t t = 0; t < aux_types.size(); ++t) {
    Pool& pool = pools[t];
    pool.community = Communities(cfg.aux[t].count, cfg.c, rng);
    pool.by_community.resize(cfg.c);
    for (std::size_t i = 0; i < cfg.aux[t].count; ++i) {
      m.aux_ids.push_back(next_id);
      m.aux_community.push_back(pool.community[i]);
      const NodeId v = g.AddNode(next_id++, aux_types[t]);
      pool.nodes.push_back(v);
      pool.by_community[pool.community[i]].push_back(v);
    }
  }

  for (std::size_t i = 0; i < bags.size(); ++i) {
    for (std::size_t t = 0; t < pools.size(); ++t) {
      for (NodeId v : DrawPartners(pools[t], m.bag_community[i], cfg.bag_degree,
                                   cfg.epsilon, rng)) {
        g.AddEdge(bag_rel[t], bags[i], v);
      }
    }
  }
  for (std::size_t t = 0; t + 1 < pools.size(); ++t) {
    for (std::size_t i = 0; i < pools[t].nodes.size(); ++i) {
      for (NodeId v : DrawPartners(pools[t + 1], pools[t].community[i],
                                   cfg.aux_degree, cfg.epsilon, rng)) {
        g.AddEdge(chain_rel[t], pools[t].nodes[i], v);
      }
    }
  }

  std::bernoulli_distribution flip(cfg.label_flip);
  std::uniform_int_distribution<std::size_t> count(cfg.min_instances,
                                                   cfg.max_instances);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const auto& own = community_labels[m.bag_community[i]];
    std::vector<LabelIndex> labels;
    for (std::size_t j = 0; j < cfg.q; ++j) {
      const bool in = std::find(own.begin(), own.end(), j) != own.end();
      if (in != flip(rng)) labels.push_back(static_cast<LabelIndex>(j));
    }
    if (labels.empty()) labels.push_back(own.front());

    Bag bag;
    bag.node = bags[i];
    bag.labels = labels;
    const std::size_t n = count(rng);
    bag.instances = Matrix::Zero(static_cast<Eigen::Index>(n),
                                 static_cast<Eigen::Index>(cfg.d));
    std::vector<LabelIndex> rows;
    std::uniform_int_distribution<std::size_t> which(0, labels.size() - 1);
    for (std::size_t r = 0; r < n; ++r) {
      const LabelIndex l = labels[which(rng)];
      rows.push_back(l);
      for (std::size_t c = 0; c < cfg.d; ++c) {
        bag.instances(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            (c == l ? cfg.centroid_scale : 0.0) + cfg.sigma_f * noise(rng);
      }
    }
    m.instance_labels.push_back(std::move(rows));
    g.SetBag(std::move(bag));
  }
  g.Finalize();
  m.oracle_macro_f1 = NearestCentroidOracleF1(g, m);
  return result;
}

LabelIndex NearestCentroid(const Eigen::Ref<const Vector>& row, std::size_t q,
                           double scale) {
  LabelIndex best = 0;
  double best_dist = 0.0;
  for (std::size_t j = 0; j < q; ++j) {
    Vector centroid = Vector::Zero(row.size());
    centroid[static_cast<Eigen::Index>(j)] = scale;
    const double dist = (row - centroid).squaredNorm();
    if (j == 0 || dist < best_dist) {
      best = static_cast<LabelIndex>(j);
      best_dist = dist;
    }
  }
  return best;
}

double NearestCentroidInstanceAccuracy(const Hmin& g, const SynthManifest& m) {
  double hits = 0.0, total = 0.0;
  for (std::size_t i = 0; i < m.bag_ids.size(); ++i) {
    const Bag& bag = g.bag(*g.FindNode(m.bag_ids[i]));
    for (Eigen::Index r = 0; r < bag.instances.rows(); ++r) {
      const LabelIndex l = NearestCentroid(bag.instances.row(r).transpose(),
                                           m.label_community.size(),
                                           m.centroid_scale);
      hits += l == m.instance_labels[i][static_cast<std::size_t>(r)];
      total += 1.0;
    }
  }
  return total > 0 ? hits / total : 0.0;
}

double NearestCentroidOracleF1(const Hmin& g, const SynthManifest& m) {
  const std::size_t q = m.label_community.size();
  std::size_t c = 0;
  for (std::size_t k : m.label_community) c = std::max(c, k + 1);
  std::vector<double> tp(q), fp(q), fn(q);
  for (std::uint64_t id : m.bag_ids) {
    const Bag& bag = g.bag(*g.FindNode(id));
    std::vector<std::size_t> votes(c);
    for (Eigen::Index r = 0; r < bag.instances.rows(); ++r) {
      ++votes[m.label_community[NearestCentroid(bag.instances.row(r).transpose(),
                                                q, m.centroid_scale)]];
    }
    const std::size_t winner = static_cast<std::size_t>(
        std::max_element(votes.begin(), votes.end()) - votes.begin());
    for (std::size_t j = 0; j < q; ++j) {
      const bool p = m.label_community[j] == winner;
      const bool t = std::binary_search(bag.labels.begin(), bag.labels.end(), j);
      tp[j] += p && t;
      fp[j] += p && !t;
      fn[j] += !p && t;
    }
  }
  double total = 0.0, labels = 0.0;
  for (std::size_t j = 0; j < q; ++j) {
    if (tp[j] + fp[j] + fn[j] == 0) continue;
    total += 2 * tp[j] / (2 * tp[j] + fp[j] + fn[j]);
    labels += 1.0;
  }
  return labels > 0 ? total / labels : 0.0;
}

CommunityDensity MeasureDensity(const Hmin& g, const SynthManifest& m) {
  std::map<NodeId, std::size_t> community;
  for (std::size_t i = 0; i < m.bag_ids.size(); ++i) {
    community[*g.FindNode(m.bag_ids[i])] = m.bag_community[i];
  }
  for (std::size_t i = 0; i < m.aux_ids.size(); ++i) {
    community[*g.FindNode(m.aux_ids[i])] = m.aux_community[i];
  }
  double within_edges = 0, cross_edges = 0, within_pairs = 0, cross_pairs = 0;
  for (const TypedEdge& e : g.Edges()) {
    (community.at(e.src) == community.at(e.dst) ? within_edges : cross_edges) += 1;
  }
  for (const Relation& rel : g.relations()) {
    const auto a = g.NodesOfType(rel.type_a);
    const auto b = g.NodesOfType(rel.type_b);
    for (NodeId u : a) {
      for (NodeId v : b) {
        (community.at(u) == community.at(v) ? within_pairs : cross_pairs) += 1;
      }
    }
  }
  CommunityDensity out;
  out.within = within_pairs > 0 ? within_edges / within_pairs : 0.0;
  out.cross = cross_pairs > 0 ? cross_edges / cross_pairs : 0.0;
  out.cross_edges = static_cast<std::size_t>(cross_edges);
  return out;
}

std::string SerializeManifest(const SynthManifest& m) {
  std::ostringstream out;
  out << "SYNTH v1 seed=" << m.seed << "\n";
  out << "ORACLE macro_f1=" << FormatDouble(m.oracle_macro_f1) << "\n";
  out << "SCALE " << FormatDouble(m.centroid_scale) << "\n";
  out << "LC";
  for (std::size_t k : m.label_community) out << " " << k;
  out << "\n";
  for (std::size_t i = 0; i < m.bag_ids.size(); ++i) {
    out << "B " << m.bag_ids[i] << " " << m.bag_community[i] << "\n";
    out << "I " << m.bag_ids[i];
    for (LabelIndex l : m.instance_labels[i]) out << " " << l;
    out << "\n";
  }
  for (std::size_t i = 0; i < m.aux_ids.size(); ++i) {
    out << "A " << m.aux_ids[i] << " " << m.aux_community[i] << "\n";
  }
  return out.str();
}

void SaveManifest(const SynthManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kData, "cannot write '" + path.string() + "'");
  out << SerializeManifest(m);
}

SynthManifest ParseManifest(const std::string& text) {
  SynthManifest m;
  std::istringstream in(text);
  std::string line;
  auto bad = [](const std::string& what) {
    Fail(ErrorKind::kData, "synth manifest: bad " + what);
  };
  std::getline(in, line);
  if (line.rfind("SYNTH v1 seed=", 0) != 0 || !ParseUint64(line.substr(14), &m.seed)) {
    bad("header");
  }
  while (std::getline(in, line)) {
    std::istringstream f(line);
    std::string tag;
    f >> tag;
    std::vector<std::string> toks;
    for (std::string t; f >> t;) toks.push_back(t);
    auto u64 = [&](const std::string& t) {
      std::uint64_t v = 0;
      if (!ParseUint64(t, &v)) bad("number '" + t + "'");
      return v;
    };
    if (tag == "ORACLE") {
      if (toks.size() != 1 || toks[0].rfind("macro_f1=", 0) != 0 ||
          !ParseDouble(toks[0].substr(9), &m.oracle_macro_f1)) {
        bad("ORACLE");
      }
    } else if (tag == "SCALE") {
      if (toks.size() != 1 || !ParseDouble(toks[0], &m.centroid_scale)) bad("SCALE");
    } else if (tag == "LC") {
      for (const auto& t : toks) m.label_community.push_back(u64(t));
    } else if (tag == "B") {
      if (toks.size() != 2) bad("B");
      m.bag_ids.push_back(u64(toks[0]));
      m.bag_community.push_back(u64(toks[1]));
    } else if (tag == "I") {
      if (toks.empty() || m.bag_ids.empty() || u64(toks[0]) != m.bag_ids.back()) bad("I");
      std::vector<LabelIndex> rows;
      for (std::size_t i = 1; i < toks.size(); ++i) {
        rows.push_back(static_cast<LabelIndex>(u64(toks[i])));
      }
      m.instance_labels.push_back(std::move(rows));
    } else if (tag == "A") {
      if (toks.size() != 2) bad("A");
      m.aux_ids.push_back(u64(toks[0]));
      m.aux_community.push_back(u64(toks[1]));
    } else if (!tag.empty()) {
      bad("record '" + tag + "'");
    }
  }
  return m;
}

SynthManifest LoadManifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kData, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseManifest(buf.str());
}

}  // namespace metamiml
