package main

var c = make(chan int, 2)
var d = make(chan int, 2)

func main() {
	go A()
	go B()
	go C()
}

func A() {
	<-d
	c <- 1
}

func B() {
	<-c
}

func C() {
	d <- 2
}
