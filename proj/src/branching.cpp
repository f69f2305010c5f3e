#include "qsdfv/branching.hpp"

#include <algorithm>

namespace qsdfv {

BranchingSimulator::BranchingSimulator(const OffspringLaw& law,
                                       MultitypeState init, std::uint64_t seed,
                                       std::size_t population_cap)
    : law_(law), n_types_(init.n_types), cap_(population_cap), rng_(seed) {
  if (init.individuals.empty())
    throw std::invalid_argument("branching: need at least one individual");
  if (init.n_types < 1)
    throw std::invalid_argument("branching: need at least one type");
  by_type_.resize(static_cast<std::size_t>(n_types_));
  for (const auto& ind : init.individuals) {
    if (ind.type < 0 || ind.type >= n_types_)
      throw std::invalid_argument("branching: individual type out of range");
    if (ind.pos < 1)
      throw std::invalid_argument("branching: individual position must be >= 1");
    append_individual(ind.type, ind.pos);
  }
}

MultitypeState BranchingSimulator::state() const {
  MultitypeState z;
  z.n_types = n_types_;
  z.individuals.reserve(types_.size());
  for (std::size_t k = 0; k < types_.size(); ++k)
    z.individuals.push_back(Individual{types_[k], pos_[k]});
  return z;
}

void BranchingSimulator::append_individual(int type, int pos) {
  if (types_.size() >= cap_) throw PopulationCapError(time_, types_.size());
  types_.push_back(type);
  pos_.push_back(pos);
  by_type_[static_cast<std::size_t>(type)].push_back(types_.size() - 1);
  weights_.push_back(pos);
  if (pos >= static_cast<int>(occ_.size()))
    occ_.resize(static_cast<std::size_t>(pos) * 2 + 1, 0);
  occ_[static_cast<std::size_t>(pos)] += 1;
  rmax_ = std::max(rmax_, pos);
}

void BranchingSimulator::move_individual(std::size_t k, int new_pos) {
  int old = pos_[k];
  if (new_pos == old) return;
  if (new_pos >= static_cast<int>(occ_.size()))
    occ_.resize(static_cast<std::size_t>(new_pos) * 2 + 1, 0);
  occ_[static_cast<std::size_t>(old)] -= 1;
  occ_[static_cast<std::size_t>(new_pos)] += 1;
  pos_[k] = new_pos;
  weights_.set(k, new_pos);
  if (new_pos > rmax_) rmax_ = new_pos;
  while (rmax_ > 1 && occ_[static_cast<std::size_t>(rmax_)] == 0) --rmax_;
  on_individual_moved(k, new_pos);
}

void BranchingSimulator::spatial_event() {
  std::size_t k = weights_.find(static_cast<std::int64_t>(
      rng_.uniform_below(static_cast<std::uint64_t>(weights_.total()))));
  int x = pos_[k];
  int l = law_.sample(rng_);
  if (l == 1) return;
  if (l == 0 && x == 1) return;  // no jumps to the absorbing state
  move_individual(k, x + l - 1);
}

long long BranchingSimulator::branch_event(int target_type, int source_type,
                                           long long tracked) {
  auto& src = by_type_[static_cast<std::size_t>(source_type)];
  const std::size_t n_src = src.size();  // snapshot: newborns do not re-branch
  long long newborn_of_tracked = -1;
  for (std::size_t s = 0; s < n_src; ++s) {
    std::size_t k = src[s];
    append_individual(target_type, pos_[k]);
    if (static_cast<long long>(k) == tracked)
      newborn_of_tracked = static_cast<long long>(types_.size()) - 1;
  }
  return newborn_of_tracked;
}

bool BranchingSimulator::step_until(double t_end) {
  const double spatial_rate = static_cast<double>(weights_.total());
  const double branch_rate = n_types_ >= 2 ? n_types_ * law_.qbar() : 0.0;
  const double total = spatial_rate + branch_rate;
  double dt = rng_.exponential(total);
  if (time_ + dt >= t_end) {
    time_ = t_end;
    return false;
  }
  time_ += dt;
  ++events_;
  if (rng_.uniform01() * total < branch_rate) {
    int i = static_cast<int>(rng_.uniform_below(static_cast<std::uint64_t>(n_types_)));
    int j = static_cast<int>(rng_.uniform_below(static_cast<std::uint64_t>(n_types_ - 1)));
    if (j >= i) ++j;
    on_pair_event(i, j);
  } else {
    spatial_event();
  }
  return true;
}

CoupledSimulator::CoupledSimulator(const OffspringLaw& law,
                                   const ParticleConfig& xi0, std::uint64_t seed,
                                   std::size_t population_cap)
    : BranchingSimulator(law, MultitypeState::paired_with(xi0), seed,
                         population_cap),
      xi_(xi0) {
  ride_.resize(static_cast<std::size_t>(xi0.n()));
  ridden_by_.assign(population(), -1);
  for (int i = 0; i < xi0.n(); ++i) {
    ride_[static_cast<std::size_t>(i)] = i;  // particle i starts on individual i
    ridden_by_[static_cast<std::size_t>(i)] = i;
  }
}

void CoupledSimulator::on_individual_moved(std::size_t k, int new_pos) {
  if (k < ridden_by_.size()) {
    int p = ridden_by_[k];
    if (p >= 0) xi_.move_particle(p, new_pos);
  }
}

void CoupledSimulator::on_pair_event(int target_type, int source_type) {
  const int i = target_type, j = source_type;
  long long newborn = branch_event(i, j, ride_[static_cast<std::size_t>(j)]);
  ridden_by_.resize(population(), -1);

  // thinning: the pair event moves the particle only when it can be absorbed
  double keep = law().rate(xi_.position(i), 0) / law().qbar();
  if (keep <= 0.0) return;
  if (keep < 1.0 && rng().uniform01() >= keep) return;

  ridden_by_[static_cast<std::size_t>(ride_[static_cast<std::size_t>(i)])] = -1;
  ride_[static_cast<std::size_t>(i)] = newborn;
  ridden_by_[static_cast<std::size_t>(newborn)] = i;
  xi_.move_particle(i, xi_.position(j));
}

bool CoupledSimulator::invariants_ok() const {
  for (int i = 0; i < xi_.n(); ++i) {
    long long k = ride_[static_cast<std::size_t>(i)];
    if (k < 0) return false;
    if (type_of(static_cast<std::size_t>(k)) != i) return false;
    if (position_of(static_cast<std::size_t>(k)) != xi_.position(i)) return false;
  }
  return xi_.rightmost() <= rightmost();
}

}  // namespace qsdfv
