//! Chain dynamic program over (stage, consumed latency budget).
//!
//! `table[s][t]` holds the cheapest way to configure stages `0..=s` using
//! exactly `t` milliseconds of budget. Candidates are ranked by total cost,
//! then by total batch size (smaller batches mean lower per-request latency);
//! equal keys keep the first candidate found, which makes the result
//! deterministic. Work is `O(|S| * SLO * options)`.

use super::StagePlan;

#[derive(Debug, Clone, Copy)]
pub(super) struct StageOption {
    pub plan: StagePlan,
    pub cost: u64,
    pub budget: u32,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    cost: u64,
    batch_sum: u64,
    option: u32,
    prev_budget: u32,
}

impl Cell {
    fn better_than(&self, other: &Cell) -> bool {
        (self.cost, self.batch_sum) < (other.cost, other.batch_sum)
    }
}

fn relax(slot: &mut Option<Cell>, candidate: Cell) {
    match slot {
        Some(current) if !candidate.better_than(current) => {}
        _ => *slot = Some(candidate),
    }
}

pub(super) fn solve_chain(options: &[Vec<StageOption>], slo: u32) -> Option<Vec<StagePlan>> {
    if options.is_empty() || options.iter().any(Vec::is_empty) {
        return None;
    }
    let width = slo as usize + 1;
    let mut table: Vec<Vec<Option<Cell>>> = Vec::with_capacity(options.len());

    let mut first = vec![None; width];
    for (k, opt) in options[0].iter().enumerate() {
        if opt.budget > slo {
            continue;
        }
        relax(
            &mut first[opt.budget as usize],
            Cell {
                cost: opt.cost,
                batch_sum: u64::from(opt.plan.batch),
                option: k as u32,
                prev_budget: 0,
            },
        );
    }
    table.push(first);

    for stage_options in &options[1..] {
        let prev = table.last().expect("at least one stage");
        let mut next = vec![None; width];
        for (spent, cell) in prev.iter().enumerate() {
            let Some(cell) = cell else { continue };
            for (k, opt) in stage_options.iter().enumerate() {
                let total = spent + opt.budget as usize;
                if total >= width {
                    continue;
                }
                relax(
                    &mut next[total],
                    Cell {
                        cost: cell.cost + opt.cost,
                        batch_sum: cell.batch_sum + u64::from(opt.plan.batch),
                        option: k as u32,
                        prev_budget: spent as u32,
                    },
                );
            }
        }
        table.push(next);
    }

    // Best terminal cell; among equal keys the smaller budget (lower latency) wins.
    let last = table.last().expect("at least one stage");
    let (mut budget, _) = last
        .iter()
        .enumerate()
        .filter_map(|(t, c)| c.map(|c| (t, c)))
        .reduce(|best, cand| if cand.1.better_than(&best.1) { cand } else { best })?;

    let mut plans = vec![StagePlan::new(0, 0, 0); options.len()];
    for stage in (0..options.len()).rev() {
        let cell = table[stage][budget].expect("backtracking follows filled cells");
        plans[stage] = options[stage][cell.option as usize].plan;
        budget = cell.prev_budget as usize;
    }
    Some(plans)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opt(batch: u32, cost: u64, budget: u32) -> StageOption {
        StageOption {
            plan: StagePlan::new(batch, cost as u32, 1),
            cost,
            budget,
        }
    }

    #[test]
    fn picks_cheapest_split_of_budget() {
        // Stage 0: cheap+slow or pricey+fast; stage 1 likewise.
        let options = vec![
            vec![opt(1, 1, 60), opt(1, 3, 20)],
            vec![opt(1, 1, 70), opt(1, 2, 30)],
        ];
        // Budget 100: (1,60)+(2,30)=90 cost 3, (3,20)+(1,70)=90 cost 4.
        let plans = solve_chain(&options, 100).unwrap();
        assert_eq!(plans[0].cores, 1);
        assert_eq!(plans[1].cores, 2);
    }

    #[test]
    fn empty_stage_is_infeasible() {
        assert!(solve_chain(&[vec![opt(1, 1, 10)], vec![]], 100).is_none());
        assert!(solve_chain(&[vec![opt(1, 1, 110)]], 100).is_none());
    }

    #[test]
    fn ties_prefer_smaller_batches() {
        let options = vec![vec![opt(4, 2, 10), opt(2, 2, 40)]];
        let plans = solve_chain(&options, 100).unwrap();
        assert_eq!(plans[0].batch, 2);
    }
}
