#include "varex/analysis.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "varex/errors.hpp"

namespace varex {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

bool isConditionalEdge(const CFG& cfg, const LiftInfo& lift, const CfgEdge& e,
                       int from) {
  if (e.kind == EdgeKind::Exceptional) return true;
  if (e.kind == EdgeKind::Uncond) return false;
  int terminator = cfg.blocks[from].last - 1;
  return lift.branchConditional[terminator] != 0;
}

// reachability closure over the vblock graph
std::vector<std::vector<char>> reachability(const std::vector<VBlock>& vbs) {
  int n = int(vbs.size());
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (int s = 0; s < n; ++s) {
    std::deque<int> work{s};
    while (!work.empty()) {
      int v = work.front();
      work.pop_front();
      for (const auto& e : vbs[v].succ)
        if (!reach[s][e.to]) {
          reach[s][e.to] = 1;
          work.push_back(e.to);
        }
    }
  }
  return reach;
}

}  // namespace

LiftInfo computeLiftBits(const MethodDef& m, const Program& p) {
  StackInfo depths = validateStackDiscipline(m, p);
  if (!depths.ok())
    throw VarexError("computeLiftBits on invalid method " + m.qualified());
  CFG cfg = buildCFG(m);
  int n = int(m.code.size());

  LiftInfo info;
  info.localIsCond.assign(m.localCount, 0);
  for (int i = 0; i < m.paramCount; ++i) info.localIsCond[i] = 1;
  info.stackBefore.assign(n, {});
  info.branchConditional.assign(n, 0);
  info.liftedInstr.assign(n, 0);

  // Fixpoint: forward taint over stack slots, then the VBlock refinement of
  // locals; repeat until neither changes a mark. Branch marks feed the
  // partition, so a pass that changes them forces another round.
  for (bool outerChanged = true; outerChanged;) {
    outerChanged = false;
    std::vector<char> branchSnapshot = info.branchConditional;

    for (int i = 0; i < n; ++i)
      info.stackBefore[i].assign(size_t(std::max(depths.depthBefore[i], 0)), 0);

    // Slots alive across a VBlock boundary travel through spill locals as
    // conditional values, so every nonempty VBlock entry is seeded lifted.
    std::vector<VBlock> vbs = partitionVBlocks(cfg, info, m);
    std::vector<char> isVBlockEntry(n, 0);
    for (const auto& vb : vbs)
      isVBlockEntry[cfg.blocks[vb.memberBlocks.front()].first] = 1;

    for (bool changed = true; changed;) {
      changed = false;
      auto flowInto = [&](int idx, const std::vector<char>& bits) {
        if (idx < 0 || idx >= n) return;
        auto& dst = info.stackBefore[idx];
        for (size_t k = 0; k < bits.size() && k < dst.size(); ++k)
          if (bits[k] && !dst[k]) {
            dst[k] = 1;
            changed = true;
          }
      };
      for (int i = 0; i < n; ++i) {
        if (depths.depthBefore[i] < 0) continue;
        if (isVBlockEntry[i]) {
          for (auto& b : info.stackBefore[i])
            if (!b) {
              b = 1;
              changed = true;
            }
        }
        std::vector<char> bits = info.stackBefore[i];
        const Instruction& ins = m.code[i];
        auto pop = [&]() {
          char b = bits.back();
          bits.pop_back();
          return b;
        };
        bool fallsThrough = true;
        switch (ins.op) {
          case Opcode::Const: bits.push_back(0); break;
          case Opcode::Load: bits.push_back(info.localIsCond[ins.slot]); break;
          case Opcode::Store: {
            char b = pop();
            if (b && !info.localIsCond[ins.slot]) {
              info.localIsCond[ins.slot] = 1;
              changed = true;
            }
            break;
          }
          case Opcode::Add:
          case Opcode::Sub:
          case Opcode::Mul:
          case Opcode::Div:
          case Opcode::Rem:
          case Opcode::CmpEq:
          case Opcode::CmpLt:
          case Opcode::CmpGt:
          case Opcode::Concat: {
            char b = pop(), a = pop();
            bits.push_back(a || b);
            break;
          }
          case Opcode::Neg: {
            char a = pop();
            bits.push_back(a);
            break;
          }
          case Opcode::Goto: fallsThrough = false; break;
          case Opcode::IfTrue: {
            char c = pop();
            if (c && !info.branchConditional[i]) {
              info.branchConditional[i] = 1;
              changed = true;
            }
            break;
          }
          case Opcode::Pop: pop(); break;
          case Opcode::Dup: {
            char a = pop();
            bits.push_back(a);
            bits.push_back(a);
            break;
          }
          case Opcode::Swap: {
            char b = pop(), a = pop();
            bits.push_back(b);
            bits.push_back(a);
            break;
          }
          case Opcode::Invoke: {
            const MethodDef* callee = p.findMethod(ins.name);
            for (int k = 0; k < ins.arity; ++k) pop();
            if (callee && callee->returnsValue) bits.push_back(1);
            break;
          }
          case Opcode::Return: fallsThrough = false; break;
          case Opcode::ReturnVal:
            pop();
            fallsThrough = false;
            break;
          case Opcode::New: bits.push_back(0); break;
          case Opcode::GetField:
            pop();
            bits.push_back(1);
            break;
          case Opcode::PutField:
            pop();
            pop();
            break;
          case Opcode::NewArray: {
            char len = pop();
            bits.push_back(len);
            break;
          }
          case Opcode::ArrLoad:
            pop();
            pop();
            bits.push_back(1);
            break;
          case Opcode::ArrStore:
            pop();
            pop();
            pop();
            break;
          case Opcode::ArrLen: {
            char a = pop();
            bits.push_back(a);
            break;
          }
          case Opcode::GetOption: bits.push_back(1); break;
          case Opcode::Throw:
            pop();
            fallsThrough = false;
            break;
          case Opcode::Intrinsic: {
            for (int k = 0; k < ins.arity; ++k) pop();
            bits.push_back(1);
            break;
          }
        }
        if (ins.op == Opcode::Goto || ins.op == Opcode::IfTrue)
          flowInto(ins.target, bits);
        if (fallsThrough) flowInto(i + 1, bits);
      }
    }

    if (branchSnapshot != info.branchConditional) outerChanged = true;

    // refinement: a store outside the always-full-context region makes the
    // local conditional (it may be written only under a narrowed context)
    vbs = partitionVBlocks(cfg, info, m);
    std::vector<int> vblockOfBB(cfg.blocks.size(), -1);
    for (int v = 0; v < int(vbs.size()); ++v)
      for (int bb : vbs[v].memberBlocks) vblockOfBB[bb] = v;

    int nv = int(vbs.size());
    auto reach = reachability(vbs);

    std::vector<std::vector<int>> preds(nv);
    int entry = 0;
    for (int v = 0; v < nv; ++v) {
      if (vbs[v].isEntry) entry = v;
      for (const auto& e : vbs[v].succ)
        if (e.to != v) preds[e.to].push_back(v);
    }
    std::set<int> all;
    for (int v = 0; v < nv; ++v) all.insert(v);
    std::vector<std::set<int>> dom(nv, all);
    dom[entry] = {entry};
    for (bool changed = true; changed;) {
      changed = false;
      for (int v = 0; v < nv; ++v) {
        if (v == entry) continue;
        std::set<int> next;
        if (!preds[v].empty()) {
          next = dom[preds[v][0]];
          for (size_t k = 1; k < preds[v].size(); ++k) {
            std::set<int> inter;
            std::set_intersection(next.begin(), next.end(),
                                  dom[preds[v][k]].begin(),
                                  dom[preds[v][k]].end(),
                                  std::inserter(inter, inter.begin()));
            next = std::move(inter);
          }
        }
        next.insert(v);
        if (next != dom[v]) {
          dom[v] = std::move(next);
          changed = true;
        }
      }
    }

    std::vector<char> fullContext(nv, 0);
    for (int v = 0; v < nv; ++v) {
      bool dominatesAllReturns = true;
      for (int r = 0; r < nv; ++r)
        if (vbs[r].isReturn && !dom[r].count(v)) dominatesAllReturns = false;
      fullContext[v] = dominatesAllReturns && !reach[v][v];
    }

    for (int i = 0; i < n; ++i) {
      if (m.code[i].op != Opcode::Store) continue;
      if (depths.depthBefore[i] < 0) continue;
      int v = vblockOfBB[cfg.blockOf[i]];
      if (!fullContext[v] && !info.localIsCond[m.code[i].slot]) {
        info.localIsCond[m.code[i].slot] = 1;
        outerChanged = true;
      }
    }
  }

  // Reporting marks: instructions whose emitted form differs from the plain
  // opcode. Object, array, call and throw instructions are always rewritten.
  for (int i = 0; i < n; ++i) {
    const Instruction& ins = m.code[i];
    const auto& bits = info.stackBefore[i];
    auto topBits = [&](int k) {
      bool any = false;
      for (int j = 0; j < k && j < int(bits.size()); ++j)
        any = any || bits[bits.size() - 1 - size_t(j)];
      return any;
    };
    switch (ins.op) {
      case Opcode::Add:
      case Opcode::Sub:
      case Opcode::Mul:
      case Opcode::Div:
      case Opcode::Rem:
      case Opcode::CmpEq:
      case Opcode::CmpLt:
      case Opcode::CmpGt:
      case Opcode::Concat: info.liftedInstr[i] = topBits(2); break;
      case Opcode::Neg: info.liftedInstr[i] = topBits(1); break;
      case Opcode::Store:
        info.liftedInstr[i] = info.localIsCond[ins.slot];
        break;
      case Opcode::IfTrue: info.liftedInstr[i] = info.branchConditional[i]; break;
      case Opcode::Intrinsic: info.liftedInstr[i] = topBits(ins.arity); break;
      case Opcode::GetOption:
      case Opcode::Invoke:
      case Opcode::New:
      case Opcode::GetField:
      case Opcode::PutField:
      case Opcode::NewArray:
      case Opcode::ArrLoad:
      case Opcode::ArrStore:
      case Opcode::ArrLen:
      case Opcode::Throw: info.liftedInstr[i] = 1; break;
      default: info.liftedInstr[i] = 0; break;
    }
  }
  return info;
}

std::vector<VBlock> partitionVBlocks(const CFG& cfg, const LiftInfo& lift,
                                     const MethodDef& m) {
  int nb = int(cfg.blocks.size());
  UnionFind uf(nb);

  struct Pred {
    int from;
    bool conditional;
  };
  std::vector<std::vector<Pred>> preds(nb);
  for (int b = 0; b < nb; ++b)
    for (const auto& e : cfg.blocks[b].succ)
      preds[e.to].push_back({b, isConditionalEdge(cfg, lift, e, b)});

  for (bool changed = true; changed;) {
    changed = false;
    for (int b2 = 0; b2 < nb; ++b2) {
      if (preds[b2].empty()) continue;
      bool allNonCond = true;
      int vb = -1;
      bool same = true;
      for (const auto& pr : preds[b2]) {
        if (pr.conditional) allNonCond = false;
        int v = uf.find(pr.from);
        if (vb == -1)
          vb = v;
        else if (v != vb)
          same = false;
      }
      if (allNonCond && same && uf.find(b2) != vb) {
        uf.unite(vb, b2);
        changed = true;
      }
    }
  }

  std::map<int, std::vector<int>> groups;
  for (int b = 0; b < nb; ++b) groups[uf.find(b)].push_back(b);
  std::vector<std::pair<int, std::vector<int>>> orderedGroups;
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end(), [&](int a, int b) {
      return cfg.blocks[a].first < cfg.blocks[b].first;
    });
    orderedGroups.emplace_back(cfg.blocks[members.front()].first, members);
  }
  std::sort(orderedGroups.begin(), orderedGroups.end());

  std::vector<int> vblockOfBB(nb, -1);
  for (int v = 0; v < int(orderedGroups.size()); ++v)
    for (int bb : orderedGroups[v].second) vblockOfBB[bb] = v;

  std::vector<VBlock> vbs;
  for (auto& [firstInstr, members] : orderedGroups) {
    VBlock vb;
    vb.memberBlocks = members;
    vb.firstInstr = firstInstr;
    for (int bb : members) {
      if (cfg.blocks[bb].first == 0) vb.isEntry = true;
      const Instruction& last = m.code[cfg.blocks[bb].last - 1];
      if (last.op == Opcode::Return || last.op == Opcode::ReturnVal)
        vb.isReturn = true;
      for (const auto& e : cfg.blocks[bb].succ) {
        bool cond = isConditionalEdge(cfg, lift, e, bb);
        int toV = vblockOfBB[e.to];
        int fromV = vblockOfBB[bb];
        if (toV == fromV && !cond) continue;  // internal edge
        EdgeKind kind = cond ? e.kind : EdgeKind::Uncond;
        bool dup = false;
        for (const auto& s : vb.succ)
          if (s.to == toV && s.kind == kind) dup = true;
        if (!dup) vb.succ.push_back({toV, kind});
      }
    }
    vbs.push_back(std::move(vb));
  }
  return vbs;
}

std::vector<VBlock> orderVBlocks(std::vector<VBlock> vblocks) {
  int n = int(vblocks.size());
  int returnCount = 0;
  for (const auto& vb : vblocks) returnCount += vb.isReturn ? 1 : 0;
  if (returnCount > 1)
    throw EngineBug("orderVBlocks: multiple return VBlocks (normalize first)");

  auto reach = reachability(vblocks);
  auto strictPred = [&](int a, int b) { return reach[a][b] && !reach[b][a]; };

  std::vector<int> order;
  std::vector<char> placed(n, 0);
  for (int step = 0; step < n; ++step) {
    int best = -1;
    for (int v = 0; v < n; ++v) {
      if (placed[v]) continue;
      bool ready = true;
      for (int u = 0; u < n; ++u)
        if (!placed[u] && u != v && strictPred(u, v)) ready = false;
      if (!ready) continue;
      if (best == -1 || vblocks[v].firstInstr < vblocks[best].firstInstr)
        best = v;
    }
    if (best == -1) throw EngineBug("orderVBlocks: no schedulable VBlock");
    placed[best] = 1;
    order.push_back(best);
  }

  std::vector<int> newIndex(n);
  for (int i = 0; i < n; ++i) newIndex[order[i]] = i;
  std::vector<VBlock> out;
  for (int i = 0; i < n; ++i) {
    VBlock vb = vblocks[order[i]];
    for (auto& e : vb.succ) e.to = newIndex[e.to];
    out.push_back(std::move(vb));
  }
  if (!out.empty()) {
    if (!out.front().isEntry)
      throw EngineBug("orderVBlocks: entry VBlock is not first");
    if (returnCount == 1 && !out.back().isReturn)
      throw EngineBug("orderVBlocks: return VBlock is not last");
  }
  return out;
}

const char* sharingGuaranteeName(SharingGuarantee g) {
  return g == SharingGuarantee::GuaranteedOptimal ? "GUARANTEED_OPTIMAL"
                                                  : "NO_GUARANTEE";
}

SharingGuarantee classifySharingGuarantee(const std::vector<VBlock>& ordered) {
  int n = int(ordered.size());
  auto reach = reachability(ordered);

  std::vector<int> sccId(n, -1);
  int sccCount = 0;
  for (int v = 0; v < n; ++v) {
    if (sccId[v] != -1) continue;
    sccId[v] = sccCount;
    for (int u = v + 1; u < n; ++u)
      if (sccId[u] == -1 && reach[v][u] && reach[u][v]) sccId[u] = sccCount;
    ++sccCount;
  }

  for (int s = 0; s < sccCount; ++s) {
    std::vector<int> members;
    for (int v = 0; v < n; ++v)
      if (sccId[v] == s) members.push_back(v);
    bool selfEdge = false;
    for (int v : members)
      for (const auto& e : ordered[v].succ)
        if (e.to == v) selfEdge = true;
    bool isLoop = members.size() > 1 || selfEdge;
    if (!isLoop) continue;

    int headers = 0, exiters = 0;
    int theExiter = -1;
    for (int v : members) {
      bool externalIn = ordered[v].isEntry;
      for (int u = 0; u < n; ++u) {
        if (sccId[u] == s) continue;
        for (const auto& e : ordered[u].succ)
          if (e.to == v) externalIn = true;
      }
      if (externalIn) ++headers;
      bool externalOut = false;
      for (const auto& e : ordered[v].succ)
        if (sccId[e.to] != s) externalOut = true;
      if (externalOut) {
        ++exiters;
        theExiter = v;
      }
    }
    if (headers != 1 || exiters != 1) return SharingGuarantee::NoGuarantee;
    for (int v : members) {
      if (v == theExiter) continue;
      for (const auto& e : ordered[v].succ)
        if (e.kind != EdgeKind::Uncond) return SharingGuarantee::NoGuarantee;
    }
  }
  return SharingGuarantee::GuaranteedOptimal;
}

MethodAnalysis analyzeMethod(const MethodDef& m, const Program& p) {
  MethodAnalysis a;
  a.normalized = normalizeReturns(m);
  a.stack = validateStackDiscipline(a.normalized, p);
  if (!a.stack.ok()) {
    std::string s;
    for (const auto& e : a.stack.errors) s += e.message + "\n";
    throw VarexError("invalid method " + m.qualified() + ":\n" + s);
  }
  a.cfg = buildCFG(a.normalized);
  a.lift = computeLiftBits(a.normalized, p);
  a.vblocks = orderVBlocks(partitionVBlocks(a.cfg, a.lift, a.normalized));
  a.guarantee = classifySharingGuarantee(a.vblocks);
  a.vblockOfBB.assign(a.cfg.blocks.size(), -1);
  for (int v = 0; v < int(a.vblocks.size()); ++v)
    for (int bb : a.vblocks[v].memberBlocks) a.vblockOfBB[bb] = v;
  return a;
}

std::string dumpBlocks(const MethodAnalysis& a, const std::string& qualified) {
  std::ostringstream out;
  out << "method " << qualified << "\n";
  out << "  vblocks " << a.vblocks.size() << "  guarantee "
      << sharingGuaranteeName(a.guarantee) << "  lifted "
      << a.lift.liftedCount() << "/" << a.normalized.code.size() << "\n";
  for (int v = 0; v < int(a.vblocks.size()); ++v) {
    const VBlock& vb = a.vblocks[v];
    out << "  b" << v << ": blocks";
    for (int bb : vb.memberBlocks)
      out << " [" << a.cfg.blocks[bb].first << "," << a.cfg.blocks[bb].last
          << ")";
    if (vb.isEntry) out << " entry";
    if (vb.isReturn) out << " return";
    out << "\n";
    for (const auto& e : vb.succ) {
      out << "    -> b" << e.to << " ";
      switch (e.kind) {
        case EdgeKind::Uncond: out << "uncond"; break;
        case EdgeKind::CondTrue: out << "cond-true"; break;
        case EdgeKind::CondFalse: out << "cond-false"; break;
        case EdgeKind::Exceptional: out << "exceptional"; break;
      }
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace varex
