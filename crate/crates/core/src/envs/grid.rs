//! Five Rooms layout: parsing, validation and the per-macro distance fields.
//!
//! Map files are ASCII, one line per row: `#` wall, `.` free, `S` start,
//! `G` goal, `1`-`4` the one-cell doors. Rooms are the 4-connected components
//! of free cells (start and goal included, doors excluded); each door must
//! join exactly two rooms.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

/// The shipped 29 x 27 layout.
pub const CANONICAL_MAP: &str = include_str!("../../maps/five_rooms.txt");

const UNREACHABLE: u32 = u32::MAX;
const DOORS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Wall,
    Free,
    Start,
    Goal,
    /// Door `d1`..`d4`, stored as index 0..3.
    Door(u8),
}

impl CellKind {
    fn parse(ch: char) -> Option<Self> {
        Some(match ch {
            '#' => Self::Wall,
            '.' => Self::Free,
            'S' => Self::Start,
            'G' => Self::Goal,
            '1'..='4' => Self::Door(ch as u8 - b'1'),
            _ => return None,
        })
    }

    pub fn symbol(self) -> char {
        match self {
            Self::Wall => '#',
            Self::Free => '.',
            Self::Start => 'S',
            Self::Goal => 'G',
            Self::Door(i) => (b'1' + i) as char,
        }
    }

    fn is_room_cell(self) -> bool {
        matches!(self, Self::Free | Self::Start | Self::Goal)
    }
}

/// The five macro-actions: one per door, plus go-to-goal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Macro {
    Door1,
    Door2,
    Door3,
    Door4,
    Goal,
}

impl Macro {
    pub const COUNT: usize = 5;
    pub const ALL: [Macro; 5] = [Macro::Door1, Macro::Door2, Macro::Door3, Macro::Door4, Macro::Goal];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn door(index: usize) -> Option<Self> {
        (index < DOORS).then(|| Self::ALL[index])
    }

    pub fn door_index(self) -> Option<usize> {
        (self != Macro::Goal).then_some(self as usize)
    }
}

impl fmt::Display for Macro {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.door_index() {
            Some(i) => write!(f, "d{}", i + 1),
            None => write!(f, "goal"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("map is empty")]
    Empty,
    #[error("row {row} has {found} columns, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("map is {height}x{width}, expected {expected_height}x{expected_width}")]
    Dimensions {
        height: usize,
        width: usize,
        expected_height: usize,
        expected_width: usize,
    },
    #[error("unknown character {ch:?} at row {row}, column {col}")]
    UnknownChar { row: usize, col: usize, ch: char },
    #[error("expected exactly one start cell, found {0}")]
    StartCount(usize),
    #[error("expected exactly one goal cell, found {0}")]
    GoalCount(usize),
    #[error("door d{door} is wider than one cell")]
    DoorWidth { door: usize },
    #[error("door d{door} must join exactly two rooms, joins {rooms}")]
    DoorRooms { door: usize, rooms: usize },
    #[error("found {found} rooms, expected {expected}")]
    RoomCount { found: usize, expected: usize },
    #[error("goal is unreachable from the start")]
    Unreachable,
    #[error("shortest start-to-goal path is {found} steps, expected {expected}")]
    Distance { found: usize, expected: usize },
    #[error("start must lie in the top-left quadrant and goal in the bottom-right one")]
    Regions,
}

/// Which invariants [`load_map`] enforces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapOptions {
    /// `(height, width)`.
    pub dims: Option<(usize, usize)>,
    pub rooms: Option<usize>,
    pub expected_distance: Option<usize>,
    pub check_regions: bool,
}

impl MapOptions {
    /// 29 rows x 27 columns, five rooms, 54-step shortest path.
    pub fn canonical() -> Self {
        Self {
            dims: Some((29, 27)),
            rooms: Some(5),
            expected_distance: Some(54),
            check_regions: true,
        }
    }

    /// For toy maps in tests: only the start-goal distance is checked.
    pub fn relaxed(expected_distance: usize) -> Self {
        Self {
            dims: None,
            rooms: None,
            expected_distance: Some(expected_distance),
            check_regions: false,
        }
    }
}

impl Default for MapOptions {
    fn default() -> Self {
        Self::canonical()
    }
}

/// Distances to one macro target within one room.
#[derive(Clone, Debug)]
struct Field {
    room: usize,
    target: usize,
    dist: Vec<u32>,
}

/// A validated Five Rooms layout. Cells are addressed by `row * width + col`.
#[derive(Clone, Debug)]
pub struct GridMap {
    height: usize,
    width: usize,
    cells: Vec<CellKind>,
    start: usize,
    goal: usize,
    doors: [Option<usize>; DOORS],
    room_of: Vec<Option<usize>>,
    rooms: usize,
    door_rooms: [Option<(usize, usize)>; DOORS],
    goal_room: usize,
    goal_distance: Vec<u32>,
    door_fields: [Vec<Field>; DOORS],
    goal_field: Field,
}

/// Parses and validates the canonical layout.
pub fn canonical_map() -> GridMap {
    load_map(CANONICAL_MAP, &MapOptions::canonical()).expect("shipped map is valid")
}

pub fn load_map(text: &str, options: &MapOptions) -> Result<GridMap, MapError> {
    let rows: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    if rows.is_empty() || rows[0].is_empty() {
        return Err(MapError::Empty);
    }
    let height = rows.len();
    let width = rows[0].chars().count();
    for (row, line) in rows.iter().enumerate() {
        let found = line.chars().count();
        if found != width {
            return Err(MapError::Ragged {
                row,
                found,
                expected: width,
            });
        }
    }
    if let Some((h, w)) = options.dims {
        if (height, width) != (h, w) {
            return Err(MapError::Dimensions {
                height,
                width,
                expected_height: h,
                expected_width: w,
            });
        }
    }

    let mut cells = Vec::with_capacity(height * width);
    for (row, line) in rows.iter().enumerate() {
        for (col, ch) in line.chars().enumerate() {
            cells.push(CellKind::parse(ch).ok_or(MapError::UnknownChar { row, col, ch })?);
        }
    }
    let find = |cells: &[CellKind], kind: CellKind| -> Vec<usize> {
        cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == kind)
            .map(|(i, _)| i)
            .collect()
    };
    let starts = find(&cells, CellKind::Start);
    if starts.len() != 1 {
        return Err(MapError::StartCount(starts.len()));
    }
    let goals = find(&cells, CellKind::Goal);
    if goals.len() != 1 {
        return Err(MapError::GoalCount(goals.len()));
    }
    let (start, goal) = (starts[0], goals[0]);

    let mut map = GridMap {
        height,
        width,
        cells,
        start,
        goal,
        doors: [None; DOORS],
        room_of: Vec::new(),
        rooms: 0,
        door_rooms: [None; DOORS],
        goal_room: 0,
        goal_distance: Vec::new(),
        door_fields: Default::default(),
        goal_field: Field {
            room: 0,
            target: goal,
            dist: Vec::new(),
        },
    };

    for door in 0..DOORS {
        let at = find(&map.cells, CellKind::Door(door as u8));
        if at.len() > 1 {
            return Err(MapError::DoorWidth { door: door + 1 });
        }
        map.doors[door] = at.first().copied();
    }
    for door in 0..DOORS {
        if let Some(cell) = map.doors[door] {
            if map.neighbors(cell).any(|n| matches!(map.cells[n], CellKind::Door(_))) {
                return Err(MapError::DoorWidth { door: door + 1 });
            }
        }
    }

    map.label_rooms();
    if let Some(expected) = options.rooms {
        if map.rooms != expected {
            return Err(MapError::RoomCount {
                found: map.rooms,
                expected,
            });
        }
    }
    for door in 0..DOORS {
        let Some(cell) = map.doors[door] else { continue };
        let mut joined: Vec<usize> = map.neighbors(cell).filter_map(|n| map.room_of[n]).collect();
        joined.sort_unstable();
        joined.dedup();
        if joined.len() != 2 {
            return Err(MapError::DoorRooms {
                door: door + 1,
                rooms: joined.len(),
            });
        }
        map.door_rooms[door] = Some((joined[0], joined[1]));
    }
    map.goal_room = map.room_of[goal].expect("goal is a room cell");

    map.goal_distance = map.bfs_all(goal);
    let d = map.goal_distance[start];
    if d == UNREACHABLE {
        return Err(MapError::Unreachable);
    }
    if let Some(expected) = options.expected_distance {
        if d as usize != expected {
            return Err(MapError::Distance {
                found: d as usize,
                expected,
            });
        }
    }
    if options.check_regions {
        let (sr, sc) = map.position(start);
        let (gr, gc) = map.position(goal);
        if !(sr < height / 2 && sc < width / 2 && gr >= height / 2 && gc >= width / 2) {
            return Err(MapError::Regions);
        }
    }

    for door in 0..DOORS {
        if let (Some(cell), Some((a, b))) = (map.doors[door], map.door_rooms[door]) {
            map.door_fields[door] = vec![map.room_field(cell, a), map.room_field(cell, b)];
        }
    }
    map.goal_field = map.room_field(goal, map.goal_room);
    Ok(map)
}

impl GridMap {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// `(row, col)` of a cell index.
    pub fn position(&self, cell: usize) -> (usize, usize) {
        (cell / self.width, cell % self.width)
    }

    pub fn kind(&self, cell: usize) -> CellKind {
        self.cells[cell]
    }

    pub fn is_wall(&self, cell: usize) -> bool {
        self.cells[cell] == CellKind::Wall
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn door_cell(&self, door: usize) -> Option<usize> {
        self.doors.get(door).copied().flatten()
    }

    pub fn room_count(&self) -> usize {
        self.rooms
    }

    /// Room of a non-door, non-wall cell.
    pub fn room_of(&self, cell: usize) -> Option<usize> {
        self.room_of[cell]
    }

    /// Rooms a cell belongs to: one for room cells, two for door cells.
    pub fn rooms_at(&self, cell: usize) -> Vec<usize> {
        match self.cells[cell] {
            CellKind::Door(d) => self.door_rooms[d as usize].map(|(a, b)| vec![a, b]).unwrap_or_default(),
            _ => self.room_of[cell].into_iter().collect(),
        }
    }

    /// The room containing the goal.
    pub fn goal_room(&self) -> usize {
        self.goal_room
    }

    /// Shortest primitive-move distance to the goal over all non-wall cells.
    pub fn goal_distance(&self, cell: usize) -> Option<usize> {
        let d = self.goal_distance[cell];
        (d != UNREACHABLE).then_some(d as usize)
    }

    /// Non-wall 4-neighbors in up, down, left, right order.
    pub fn neighbors(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = self.position(cell);
        let up = (r > 0).then(|| cell - self.width);
        let down = (r + 1 < self.height).then(|| cell + self.width);
        let left = (c > 0).then(|| cell - 1);
        let right = (c + 1 < self.width).then(|| cell + 1);
        [up, down, left, right]
            .into_iter()
            .flatten()
            .filter(|&n| !self.is_wall(n))
    }

    /// Whether `m` is defined at `cell`, i.e. leads directly to its target.
    pub fn is_defined(&self, cell: usize, m: Macro) -> bool {
        self.field(cell, m).is_some()
    }

    /// Length of the in-room path executed by `m` from `cell`.
    pub fn macro_distance(&self, cell: usize, m: Macro) -> Option<usize> {
        self.field(cell, m).map(|f| f.dist[cell] as usize)
    }

    /// Cells entered when executing `m` from `cell`, ending at its target.
    ///
    /// Shortest in-room path; ties go up, down, left, right.
    pub fn macro_path(&self, cell: usize, m: Macro) -> Option<Vec<usize>> {
        let field = self.field(cell, m)?;
        let mut path = Vec::with_capacity(field.dist[cell] as usize);
        let mut cur = cell;
        while cur != field.target {
            let want = field.dist[cur] - 1;
            cur = self
                .neighbors(cur)
                .find(|&n| field.dist[n] == want && (n == field.target || self.room_of[n] == Some(field.room)))
                .expect("distance field descends to its target");
            path.push(cur);
        }
        Some(path)
    }

    /// Target cell of a macro, if the map has it.
    pub fn macro_target(&self, m: Macro) -> Option<usize> {
        match m.door_index() {
            Some(d) => self.doors[d],
            None => Some(self.goal),
        }
    }

    /// Door macro into the room left of center, halfway down: the usual
    /// wrong advice sending the agent away from the goal.
    pub fn middle_left_door(&self) -> Option<Macro> {
        let mid = self.height as f64 / 2.0;
        let start_room = self.room_of[self.start];
        let mut best: Option<(f64, usize)> = None;
        for room in 0..self.rooms {
            if Some(room) == start_room || room == self.goal_room {
                continue;
            }
            let cells: Vec<(usize, usize)> = (0..self.cells.len())
                .filter(|&c| self.room_of[c] == Some(room))
                .map(|c| self.position(c))
                .collect();
            let n = cells.len() as f64;
            let row = cells.iter().map(|p| p.0 as f64).sum::<f64>() / n;
            let col = cells.iter().map(|p| p.1 as f64).sum::<f64>() / n;
            let score = col + (row - mid).abs();
            if best.is_none_or(|(s, _)| score < s) {
                best = Some((score, room));
            }
        }
        let (_, room) = best?;
        (0..DOORS)
            .find(|&d| self.door_rooms[d].is_some_and(|(a, b)| a == room || b == room))
            .and_then(Macro::door)
    }

    /// The map in file form.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.cells.len() + self.height);
        for row in self.cells.chunks(self.width) {
            out.extend(row.iter().map(|c| c.symbol()));
            out.push('\n');
        }
        out
    }

    fn field(&self, cell: usize, m: Macro) -> Option<&Field> {
        if self.is_wall(cell) {
            return None;
        }
        let rooms = self.rooms_at(cell);
        match m.door_index() {
            Some(d) => {
                let target = self.doors[d]?;
                if target == cell {
                    return None;
                }
                self.door_fields[d].iter().find(|f| rooms.contains(&f.room))
            }
            None => rooms.contains(&self.goal_room).then_some(&self.goal_field),
        }
    }

    fn label_rooms(&mut self) {
        let mut room_of = vec![None; self.cells.len()];
        let mut rooms = 0;
        for seed in 0..self.cells.len() {
            if !self.cells[seed].is_room_cell() || room_of[seed].is_some() {
                continue;
            }
            room_of[seed] = Some(rooms);
            let mut queue = VecDeque::from([seed]);
            while let Some(c) = queue.pop_front() {
                for n in self.neighbors(c) {
                    if self.cells[n].is_room_cell() && room_of[n].is_none() {
                        room_of[n] = Some(rooms);
                        queue.push_back(n);
                    }
                }
            }
            rooms += 1;
        }
        self.room_of = room_of;
        self.rooms = rooms;
    }

    fn bfs_all(&self, from: usize) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.cells.len()];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            for n in self.neighbors(c) {
                if dist[n] == UNREACHABLE {
                    dist[n] = dist[c] + 1;
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Distances to `target` through the cells of `room`. Doors bordering the
    /// room get a distance but are never passed through.
    fn room_field(&self, target: usize, room: usize) -> Field {
        let mut dist = vec![UNREACHABLE; self.cells.len()];
        dist[target] = 0;
        let mut queue = VecDeque::from([target]);
        while let Some(c) = queue.pop_front() {
            for n in self.neighbors(c) {
                if dist[n] != UNREACHABLE {
                    continue;
                }
                if self.room_of[n] == Some(room) {
                    dist[n] = dist[c] + 1;
                    queue.push_back(n);
                } else if matches!(self.cells[n], CellKind::Door(_)) {
                    dist[n] = dist[c] + 1;
                }
            }
        }
        Field { room, target, dist }
    }
}

/// The macro minimizing the remaining primitive distance to the goal from
/// `cell`; the lowest macro id wins ties.
pub fn optimal_macro(map: &GridMap, cell: usize) -> Macro {
    let mut best: Option<(usize, Macro)> = None;
    for m in Macro::ALL {
        let Some(f) = map.field(cell, m) else { continue };
        let Some(rest) = map.goal_distance(f.target) else {
            continue;
        };
        let cost = f.dist[cell] as usize + rest;
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, m));
        }
    }
    best.map_or(Macro::Goal, |(_, m)| m)
}
